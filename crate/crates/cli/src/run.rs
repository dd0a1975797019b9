use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sgkmax::experiments::bench::{
    aggregate, default_lambda_ratios, default_mu_ratios, log_grid, run_instance, BenchConfig, Method,
};
use sgkmax::experiments::synthetic::default_sparsity;
use sgkmax::experiments::{
    cross_validate, init_k_from_lasso, load_dataset, relative_grid, sparsity_stats, CvOutcome, Dataset,
    SyntheticConfig,
};
use sgkmax::{
    check_theorem2, objective, perturbation_oracle, stationary_residual, GroupedVector, OptimalityReport,
    PenaltyKind, PenaltySpec, Solver, Termination,
};

use crate::args::{CheckArgs, Command, DataArgs, FitArgs, PathArgs, RerunArgs, SynthArgs};
use crate::output::*;

pub fn execute(command: &Command) -> Result<()> {
    let outputs = match command {
        Command::Synth(a) => synth(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Path(a) => path(a)?,
        Command::Check(a) => check(a)?,
        Command::Rerun(a) => return rerun(a),
    };
    let out = match command {
        Command::Synth(a) => &a.out,
        Command::Fit(a) => &a.out,
        Command::Path(a) => &a.out,
        Command::Check(a) => &a.out,
        Command::Rerun(_) => unreachable!(),
    };
    write_json(&out.join(MANIFEST), &RunManifest::new(command, &outputs)?)
}

fn rerun(args: &RerunArgs) -> Result<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "note: recorded with version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    manifest.verify_inputs()?;
    let mut command = manifest.command;
    if matches!(command, Command::Rerun(_)) {
        bail!("manifest records a rerun");
    }
    if let (Some(out), Some(slot)) = (&args.out, command.out_mut()) {
        *slot = out.clone();
    }
    execute(&command)
}

// ---- synth ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub method: String,
    pub m: usize,
    pub seed: u64,
    pub lambda: f64,
    pub mu: f64,
    pub k: String,
    pub cv_error: f64,
    pub rmse_pct: f64,
    pub cpr_pct: f64,
    pub nnz_overall: usize,
    pub nnz_groups: usize,
    pub false_nonzeros: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCsvRow {
    pub method: String,
    pub m: usize,
    pub repeats: usize,
    pub mean_cpr_pct: f64,
    pub mean_rmse_pct: f64,
    pub mean_nnz_overall: f64,
    pub mean_nnz_groups: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub m: usize,
    pub seed: u64,
    pub wall_time: f64,
}

fn synth(a: &SynthArgs) -> Result<Vec<&'static str>> {
    ensure_dir(&a.out)?;
    let mut records = Vec::new();
    for &m in &a.m {
        let cfg = BenchConfig {
            synthetic: SyntheticConfig {
                n: a.n,
                m,
                d_per_group: a.d,
                s: a.s.clone().unwrap_or_else(|| default_sparsity(m, a.d)),
                noise_variance: a.sigma2,
                seed: a.seed,
            },
            methods: a.methods.clone(),
            lambda_ratios: a.lambda.clone().unwrap_or_else(default_lambda_ratios),
            mu_ratios: a.mu.clone().unwrap_or_else(default_mu_ratios),
            folds: a.folds,
            options: a.solver.options(),
            ..BenchConfig::default()
        };
        cfg.synthetic.validate()?;
        cfg.options.validate()?;
        for r in 0..a.repeats as u64 {
            let seed = a.seed.wrapping_add(r);
            eprintln!("m = {m}, repeat {}/{} (seed {seed})", r + 1, a.repeats);
            records.extend(run_instance(&cfg, seed)?);
        }
    }

    let rows: Vec<RecordRow> = records
        .iter()
        .map(|r| RecordRow {
            method: r.method.to_string(),
            m: r.m,
            seed: r.seed,
            lambda: r.lambda,
            mu: r.mu,
            k: join_list(&r.k),
            cv_error: r.cv_error,
            rmse_pct: r.rmse_pct,
            cpr_pct: r.cpr_pct,
            nnz_overall: r.nnz_overall,
            nnz_groups: r.nnz_groups,
            false_nonzeros: r.false_nonzeros,
            iterations: r.iterations,
        })
        .collect();
    let timing: Vec<TimingRow> = records
        .iter()
        .map(|r| TimingRow {
            method: r.method.to_string(),
            m: r.m,
            seed: r.seed,
            wall_time: r.wall_time,
        })
        .collect();
    let summary = aggregate(&records);
    let agg: Vec<AggregateCsvRow> = summary
        .iter()
        .map(|r| AggregateCsvRow {
            method: r.method.to_string(),
            m: r.m,
            repeats: r.repeats,
            mean_cpr_pct: r.mean_cpr_pct,
            mean_rmse_pct: r.mean_rmse_pct,
            mean_nnz_overall: r.mean_nnz_overall,
            mean_nnz_groups: r.mean_nnz_groups,
        })
        .collect();
    write_csv(&a.out.join(RECORDS), &rows)?;
    write_csv(&a.out.join(AGGREGATE), &agg)?;
    write_csv(&a.out.join(TIMING), &timing)?;

    println!("{:<18} {:>4} {:>8} {:>8} {:>8} {:>8} {:>9}", "method", "m", "CPR%", "RMSE%", "nnz", "groups", "time(s)");
    for r in &summary {
        println!(
            "{:<18} {:>4} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>9.2}",
            r.method.name(),
            r.m,
            r.mean_cpr_pct,
            r.mean_rmse_pct,
            r.mean_nnz_overall,
            r.mean_nnz_groups,
            r.total_wall_time
        );
    }
    Ok(vec![RECORDS, AGGREGATE, TIMING])
}

// ---- shared by fit and path ----

fn load(d: &DataArgs) -> Result<Dataset> {
    load_dataset(&d.data, &d.groups, !d.no_standardize)
        .with_context(|| format!("loading {} with {}", d.data.display(), d.groups.display()))
}

fn default_grid(ds: &Dataset) -> Vec<f64> {
    let mut g = relative_grid(&ds.design, &log_grid(1e-3, 1.0, 20));
    g.reverse();
    g
}

/// `k` from the flag, else from the group file, else the lasso heuristic.
fn resolve_k(
    flag: Option<&str>,
    method: Method,
    ds: &Dataset,
    folds: usize,
    seed: u64,
    solver: &crate::args::SolverArgs,
) -> Result<Vec<usize>> {
    if !matches!(method, Method::GroupKmax | Method::GroupKmaxPrior) {
        return Ok(Vec::new());
    }
    let auto = || -> Result<Vec<usize>> {
        Ok(init_k_from_lasso(&ds.design, &default_grid(ds), folds, seed, &solver.options())?)
    };
    match flag.map(str::trim) {
        Some("auto") => auto(),
        Some(list) => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| sgkmax::Error::InvalidArgument(format!("--k `{v}`: {e}")).into())
            })
            .collect(),
        None => match (&ds.k_overrides, method) {
            (Some(k), _) => Ok(k.clone()),
            (None, Method::GroupKmaxPrior) => {
                Err(sgkmax::Error::InvalidArgument("grpkmax-prior needs --k or k in the group file".into()).into())
            }
            (None, _) => auto(),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefRow {
    pub group: String,
    pub feature: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub penalty: PenaltySpec,
    pub standardized: bool,
    pub step: f64,
    pub iterations: usize,
    pub terminated_by: Termination,
    pub final_gap: f64,
    pub objective: f64,
    pub stationary_residual: f64,
    pub nnz_overall: usize,
    pub nnz_groups: usize,
    pub cv: Option<CvOutcome>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub response_mean: f64,
}

fn coefficient_rows(ds: &Dataset, x: &GroupedVector) -> Vec<CoefRow> {
    let mut rows = Vec::new();
    for (g, block) in x.blocks().enumerate() {
        for (name, &v) in ds.feature_names[g].iter().zip(block) {
            rows.push(CoefRow {
                group: ds.group_names[g].clone(),
                feature: name.clone(),
                coefficient: v,
            });
        }
    }
    rows
}

// ---- fit ----

fn fit(a: &FitArgs) -> Result<Vec<&'static str>> {
    let ds = load(&a.data)?;
    let design = &ds.design;
    let options = a.solver.options();
    options.validate()?;
    let k = resolve_k(a.k.as_deref(), a.method, &ds, a.folds, a.seed, &a.solver)?;
    let template = a.method.template(k);
    template.validate(design.structure())?;
    let lambdas = a.lambda.clone().unwrap_or_else(|| default_grid(&ds));
    let sgl = a.method == Method::SparseGroupLasso;
    let mus = a.mu.clone().unwrap_or_else(default_mu_ratios);

    let (penalty, cv) = if lambdas.len() == 1 && (!sgl || mus.len() == 1) {
        let mut p = template.with_lambda(lambdas[0]);
        if sgl {
            p.mu = mus[0] * lambdas[0];
        }
        (p, None)
    } else {
        let cv = cross_validate(design, &template, &lambdas, sgl.then_some(&mus[..]), a.folds, a.seed, &options)?;
        (cv.best.clone(), Some(cv))
    };
    penalty.validate(design.structure())?;

    let res = Solver::new(design, options)?.solve(&penalty)?;
    let (nnz_overall, nnz_groups) = sparsity_stats(&res.x, sgkmax::experiments::DEFAULT_SUPPORT_TOL);
    let report = FitReport {
        method: a.method,
        standardized: !a.data.no_standardize,
        step: res.step,
        iterations: res.iterations,
        terminated_by: res.terminated_by,
        final_gap: res.final_gap(),
        objective: objective(design, &res.x, &penalty)?,
        stationary_residual: stationary_residual(design, &res.x, &penalty, res.step)?,
        nnz_overall,
        nnz_groups,
        cv,
        feature_means: ds.feature_means.clone(),
        feature_scales: ds.feature_scales.clone(),
        response_mean: ds.response_mean,
        penalty,
    };

    ensure_dir(&a.out)?;
    write_csv(&a.out.join(COEFFICIENTS), &coefficient_rows(&ds, &res.x))?;
    write_json(&a.out.join(FIT_REPORT), &report)?;
    println!(
        "{}: lambda {:.6}, {} iterations ({:?}), {} nonzeros in {} groups, objective {:.6}",
        a.method,
        report.penalty.lambda,
        report.iterations,
        report.terminated_by,
        nnz_overall,
        nnz_groups,
        report.objective
    );
    Ok(vec![COEFFICIENTS, FIT_REPORT])
}

// ---- path ----

fn path(a: &PathArgs) -> Result<Vec<&'static str>> {
    let ds = load(&a.data)?;
    let design = &ds.design;
    let options = a.solver.options();
    options.validate()?;
    let k = resolve_k(a.k.as_deref(), a.method, &ds, a.folds, a.seed, &a.solver)?;
    let template = a.method.template(k);
    template.validate(design.structure())?;
    let lambdas = a.lambda.clone().unwrap_or_else(|| default_grid(&ds));
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(sgkmax::Error::InvalidPenalty(format!("lambda {l} is invalid")).into());
    }
    if lambdas.is_empty() {
        return Err(sgkmax::Error::InvalidArgument("lambda grid is empty".into()).into());
    }
    let solver = Solver::new(design, options)?;

    ensure_dir(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join(PATH))?;
    let mut header: Vec<String> = ["lambda", "mu", "nnz_overall", "nnz_groups", "objective", "iterations", "terminated_by"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(ds.feature_names.iter().flatten().cloned());
    w.write_record(&header)?;

    let mut prev: Option<GroupedVector> = None;
    for &lambda in &lambdas {
        let mut p = template.with_lambda(lambda);
        if p.kind == PenaltyKind::SparseGroupLasso {
            p.mu = a.mu * lambda;
        }
        let res = match &prev {
            Some(x) if !a.cold => solver.solve_from(&p, x)?,
            _ => solver.solve(&p)?,
        };
        let (nnz, groups) = sparsity_stats(&res.x, sgkmax::experiments::DEFAULT_SUPPORT_TOL);
        let mut row = vec![
            lambda.to_string(),
            p.mu.to_string(),
            nnz.to_string(),
            groups.to_string(),
            objective(design, &res.x, &p)?.to_string(),
            res.iterations.to_string(),
            serde_json::to_value(res.terminated_by)?.as_str().unwrap_or_default().to_string(),
        ];
        row.extend(res.x.as_slice().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
        eprintln!("lambda {lambda:.6}: {nnz} nonzeros in {groups} groups");
        prev = Some(res.x);
    }
    w.flush()?;
    Ok(vec![PATH])
}

// ---- check ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub method: Method,
    pub penalty: PenaltySpec,
    pub step: f64,
    pub stationary_residual: f64,
    pub tolerance: f64,
    pub fixed_point_ok: bool,
    /// Gap conditions; k-max penalties only.
    pub optimality: Option<OptimalityReport>,
    pub perturbation_ok: Option<bool>,
}

fn read_coefficients(path: &Path, ds: &Dataset) -> Result<GroupedVector> {
    let rows: Vec<CoefRow> = read_csv(path)?;
    let mut blocks: Vec<Vec<f64>> = ds.feature_names.iter().map(|f| vec![0.0; f.len()]).collect();
    let mut seen: Vec<Vec<bool>> = ds.feature_names.iter().map(|f| vec![false; f.len()]).collect();
    for r in rows {
        let g = ds
            .group_names
            .iter()
            .position(|n| *n == r.group)
            .ok_or_else(|| sgkmax::Error::DimensionMismatch(format!("unknown group `{}`", r.group)))?;
        let j = ds.feature_names[g]
            .iter()
            .position(|n| *n == r.feature)
            .ok_or_else(|| sgkmax::Error::DimensionMismatch(format!("unknown feature `{}`", r.feature)))?;
        blocks[g][j] = r.coefficient;
        seen[g][j] = true;
    }
    if seen.iter().flatten().any(|s| !s) {
        return Err(sgkmax::Error::DimensionMismatch("coefficients missing for some features".into()).into());
    }
    Ok(GroupedVector::from_blocks(blocks)?)
}

fn check(a: &CheckArgs) -> Result<Vec<&'static str>> {
    let ds = load(&a.data)?;
    let design = &ds.design;
    let fit: FitReport = read_json(&a.fit.join(FIT_REPORT))?;
    if fit.standardized == a.data.no_standardize {
        bail!("standardization differs from the fit");
    }
    let x = read_coefficients(&a.fit.join(COEFFICIENTS), &ds)?;
    let p = &fit.penalty;
    p.validate(design.structure())?;
    let gamma = fit.step;
    let residual = stationary_residual(design, &x, p, gamma)?;
    let optimality = match p.kind {
        PenaltyKind::GroupKmax => Some(check_theorem2(design, &x, p, gamma, a.tolerance, a.margin)?),
        _ => None,
    };
    let perturbation_ok = match a.radius {
        Some(r) => Some(perturbation_oracle(design, &x, p, r, a.samples, a.seed)?),
        None => None,
    };
    let report = CheckReport {
        method: fit.method,
        penalty: p.clone(),
        step: gamma,
        stationary_residual: residual,
        tolerance: a.tolerance,
        fixed_point_ok: residual <= a.tolerance,
        optimality,
        perturbation_ok,
    };
    ensure_dir(&a.out)?;
    write_json(&a.out.join(CHECK_REPORT), &report)?;
    let verdict = match &report.optimality {
        Some(o) if o.certified() => "OK (fixed point, gap condition holds)",
        Some(o) if o.fixed_point_ok => "fixed point, gap condition fails",
        Some(_) => "NOT a fixed point",
        None if report.fixed_point_ok => "OK (fixed point)",
        None => "NOT a fixed point",
    };
    println!("stationary residual {residual:.3e}: {verdict}");
    if let Some(ok) = perturbation_ok {
        println!("perturbation probe: {}", if ok { "no descent found" } else { "descent found" });
    }
    Ok(vec![CHECK_REPORT])
}
