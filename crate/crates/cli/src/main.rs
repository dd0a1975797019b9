mod args;
mod output;
mod run;

use std::process::ExitCode;

use clap::Parser;

/// Exit codes: 2 is clap's usage error; the rest are ours.
const EXIT_PARSE: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_DIVERGED: u8 = 5;
const EXIT_IO: u8 = 6;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sgkmax::Error>() {
            return match e {
                sgkmax::Error::Parse { .. } => EXIT_PARSE,
                sgkmax::Error::Diverged { .. } => EXIT_DIVERGED,
                sgkmax::Error::Io(_) => EXIT_IO,
                _ => EXIT_INVALID,
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return EXIT_PARSE;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match run::execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
