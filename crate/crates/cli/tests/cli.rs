use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgkmax"))
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn with_data<'a>(sub: &'a str, data_csv: &'a str, groups: &'a str) -> Vec<&'a str> {
    vec![sub, "--data", data_csv, "--groups", groups]
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

const SMALL_SYNTH: &[&str] = &[
    "synth", "--m", "3", "--n", "40", "--d", "4", "--s", "3,1,0", "--repeats", "2", "--folds", "3",
    "--lambda", "0.01,0.1,0.5", "--mu", "0.5,1", "--methods", "lasso,sparsegrouplasso,grpkmax,grpkmax-prior",
];

#[test]
fn synth_is_deterministic_and_rerunnable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let mut args = SMALL_SYNTH.to_vec();
        args.extend(["--seed", "5", "--out", s(out)]);
        assert!(run(&args).status.success());
    }
    let manifest = a.join("manifest.json");
    assert!(run(&["rerun", "--manifest", s(&manifest), "--out", s(&c)]).status.success());
    for file in ["records.csv", "aggregate.csv"] {
        let first = fs::read(a.join(file)).unwrap();
        assert_eq!(first, fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(first, fs::read(c.join(file)).unwrap(), "{file} after rerun");
    }
    let (headers, rows) = read_csv(&a.join("records.csv"));
    assert!(headers.contains(&"rmse_pct".to_string()));
    assert!(!headers.contains(&"wall_time".to_string()));
    assert_eq!(rows.len(), 2 * 4);

    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "synth");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["command"]["n"], 40);
}

#[test]
fn fit_then_check_reports_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let (fit_dir, check_dir) = (dir.path().join("fit"), dir.path().join("check"));
    let (csv, groups) = (data("diabetes.csv"), data("diabetes_groups.json"));
    let mut args = with_data("fit", s(&csv), s(&groups));
    args.extend(["--method", "grpkmax", "--k", "1,1,2", "--lambda", "20", "--tol", "1e-9", "--max-iters", "20000"]);
    args.extend(["--out", s(&fit_dir)]);
    assert!(run(&args).status.success());

    let mut args = with_data("check", s(&csv), s(&groups));
    args.extend(["--fit", s(&fit_dir), "--radius", "1e-4", "--samples", "200", "--out", s(&check_dir)]);
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("OK"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(check_dir.join("check.json")).unwrap()).unwrap();
    assert_eq!(report["fixed_point_ok"], true);
    assert!(report["optimality"]["fixed_point_ok"].as_bool().unwrap());

    let (headers, rows) = read_csv(&fit_dir.join("coefficients.csv"));
    assert_eq!(headers, ["group", "feature", "coefficient"]);
    assert_eq!(rows.len(), 10);
}

#[test]
fn lasso_and_zero_k_give_identical_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, groups) = (data("diabetes.csv"), data("diabetes_groups.json"));
    let mut outs = Vec::new();
    for (i, (method, k)) in [("lasso", None), ("grpkmax", Some("0,0,0"))].into_iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let mut args = with_data("fit", s(&csv), s(&groups));
        args.extend(["--method", method, "--lambda", "5", "--out", s(&out)]);
        if let Some(k) = k {
            args.extend(["--k", k]);
        }
        assert!(run(&args).status.success());
        outs.push(fs::read(out.join("coefficients.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn path_columns_and_large_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, groups) = (data("diabetes.csv"), data("diabetes_groups.json"));
    let mut args = with_data("path", s(&csv), s(&groups));
    args.extend(["--method", "sparsegrouplasso", "--lambda", "1e9,100,1", "--mu", "0.5", "--out", s(dir.path())]);
    assert!(run(&args).status.success());
    let (headers, rows) = read_csv(&dir.path().join("path.csv"));
    assert_eq!(&headers[..4], ["lambda", "mu", "nnz_overall", "nnz_groups"]);
    assert_eq!(headers.len(), 7 + 10);
    assert!(headers.contains(&"bmi".to_string()));
    assert_eq!(rows.len(), 3);
    // far above λ_max everything is zero
    assert_eq!(rows[0][2], "0");
    assert!(rows[0][7..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    let first: usize = rows[0][2].parse().unwrap();
    let last: usize = rows[2][2].parse().unwrap();
    assert!(first <= last);
}

#[test]
fn missing_groups_flag_is_a_usage_error() {
    let out = bin()
        .args(["fit", "--data", s(&data("diabetes.csv")), "--method", "lasso", "--out", "unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--groups"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let groups = data("diabetes_groups.json");
    let bad_csv = dir.path().join("bad.csv");
    fs::write(&bad_csv, "age,sex,bmi,bp,s1,s2,s3,s4,s5,s6,progression\n1,2,x,4,5,6,7,8,9,10,11\n").unwrap();
    let fit = |csv: &Path, extra: &[&str]| {
        let mut args = with_data("fit", s(csv), s(&groups));
        args.extend(["--method", "grpkmax-prior", "--lambda", "1", "--out"]);
        args.push(s(dir.path()));
        args.extend(extra);
        bin().args(&args).output().unwrap().status.code()
    };
    assert_eq!(fit(&bad_csv, &["--k", "1,1,1"]), Some(3));
    assert_eq!(fit(&data("diabetes.csv"), &["--k", "1,1"]), Some(4));
    assert_eq!(fit(&dir.path().join("missing.csv"), &["--k", "1,1,1"]), Some(6));
    // unit steps on unscaled data blow up
    let raw = fit(&data("diabetes.csv"), &["--k", "1,1,1", "--no-standardize", "--step", "unit"]);
    assert_eq!(raw, Some(5));
}
