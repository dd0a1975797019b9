use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sgkmax::experiments::bench::Method;
use sgkmax::{SolveOptions, StepMode};

#[derive(Parser, Debug, Clone)]
#[command(name = "sgkmax", version, about = "Sparse group k-max regularized least squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Synthetic benchmark: every method tuned by cross-validation and scored
    /// against the ground truth.
    Synth(SynthArgs),
    /// Fit one method on a CSV dataset.
    Fit(FitArgs),
    /// Solutions and sparsity along a λ grid.
    Path(PathArgs),
    /// Stationarity and local-optimality report for a previous fit.
    Check(CheckArgs),
    /// Re-execute the command recorded in a run manifest.
    Rerun(RerunArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Unit,
    Lipschitz,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Stop once Σ_i ‖x_i^(t) − x_i^(t−1)‖₂ falls to this.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Step::Lipschitz)]
    pub step: Step,
}

impl SolverArgs {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            step_mode: match self.step {
                Step::Unit => StepMode::Unit,
                Step::Lipschitz => StepMode::Lipschitz,
            },
            record_trace: false,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file naming the response column and the feature groups.
    #[arg(long)]
    pub groups: PathBuf,
    /// Use the raw columns instead of standardized features and a centered
    /// response.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Group counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Entries per group.
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Nonzeros per group; defaults to 10,8,6,4,2,1 padded with zeros.
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<usize>>,
    /// Noise variance.
    #[arg(long, default_value_t = 4.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// Seed of the first repeat; repeat r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "lasso,grouplasso,sparsegrouplasso,grpkmax-prior")]
    pub methods: Vec<Method>,
    /// λ grid as fractions of λ_max = ‖Φᵀy‖_∞ of each instance.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// μ/λ ratios for the sparse group lasso.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub method: Method,
    /// One λ fits directly; several are cross-validated. Defaults to 20
    /// log-spaced values between 1e-3·λ_max and λ_max.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// μ/λ ratios for the sparse group lasso (default 0.5,0.6,…,1).
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Per-group k as a comma list, or `auto` for the cross-validated lasso
    /// support. Falls back to the group file, then to `auto`.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub method: Method,
    /// Visited in the given order; defaults to 20 log-spaced values from
    /// λ_max down to 1e-3·λ_max.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// μ/λ ratio for the sparse group lasso.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long)]
    pub k: Option<String>,
    /// Cold-start every grid point instead of warm-starting.
    #[arg(long)]
    pub cold: bool,
    /// Used only by `--k auto`.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Largest stationary residual accepted as a fixed point.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = sgkmax::optimality::DEFAULT_MARGIN)]
    pub margin: f64,
    /// Also probe the objective at random points within this radius.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write here instead of the recorded output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Fit(_) => "fit",
            Command::Path(_) => "path",
            Command::Check(_) => "check",
            Command::Rerun(_) => "rerun",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Synth(a) => Some(a.seed),
            Command::Fit(a) => Some(a.seed),
            Command::Path(a) => Some(a.seed),
            Command::Check(a) => Some(a.seed),
            Command::Rerun(_) => None,
        }
    }

    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Synth(a) => Some(&mut a.out),
            Command::Fit(a) => Some(&mut a.out),
            Command::Path(a) => Some(&mut a.out),
            Command::Check(a) => Some(&mut a.out),
            Command::Rerun(_) => None,
        }
    }

    /// Files read by the command, recorded with digests in the manifest.
    pub fn inputs(&self) -> Vec<PathBuf> {
        let data = |d: &DataArgs| vec![d.data.clone(), d.groups.clone()];
        match self {
            Command::Synth(_) | Command::Rerun(_) => Vec::new(),
            Command::Fit(a) => data(&a.data),
            Command::Path(a) => data(&a.data),
            Command::Check(a) => {
                let mut v = data(&a.data);
                v.push(a.fit.join(crate::output::COEFFICIENTS));
                v.push(a.fit.join(crate::output::FIT_REPORT));
                v
            }
        }
    }
}
