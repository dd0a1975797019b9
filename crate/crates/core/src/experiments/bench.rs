//! Synthetic benchmark: every method is tuned by cross-validation on the
//! same instance and scored against the ground truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::experiments::cv::{cross_validate, k_from_support, relative_grid, CvOutcome};
use crate::experiments::metrics::{cpr_pct, false_nonzeros, rmse_pct, sparsity_stats};
use crate::experiments::synthetic::{gen_synthetic, SyntheticConfig};
use crate::model::{GroupedDesign, PenaltySpec};
use crate::solver::{SolveOptions, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lasso")]
    Lasso,
    #[serde(rename = "grouplasso")]
    GroupLasso,
    #[serde(rename = "sparsegrouplasso")]
    SparseGroupLasso,
    /// k-max with `k` taken from the cross-validated lasso support.
    #[serde(rename = "grpkmax")]
    GroupKmax,
    /// k-max with `k` supplied up front.
    #[serde(rename = "grpkmax-prior")]
    GroupKmaxPrior,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lasso,
        Method::GroupLasso,
        Method::SparseGroupLasso,
        Method::GroupKmax,
        Method::GroupKmaxPrior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::GroupLasso => "grouplasso",
            Method::SparseGroupLasso => "sparsegrouplasso",
            Method::GroupKmax => "grpkmax",
            Method::GroupKmaxPrior => "grpkmax-prior",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Method::Lasso | Method::GroupLasso | Method::SparseGroupLasso)
    }

    /// Penalty with λ = 0; `k` only matters for the k-max methods.
    pub fn template(self, k: Vec<usize>) -> PenaltySpec {
        match self {
            Method::Lasso => PenaltySpec::lasso(0.0),
            Method::GroupLasso => PenaltySpec::group_lasso(0.0),
            Method::SparseGroupLasso => PenaltySpec::sparse_group_lasso(0.0, 0.0),
            Method::GroupKmax | Method::GroupKmaxPrior => PenaltySpec::group_kmax(0.0, k),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown method `{s}`")))
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Default λ grid as fractions of `λ_max = ‖Φᵀy‖_∞`.
pub fn default_lambda_ratios() -> Vec<f64> {
    log_grid(1e-3, 1.0, 10)
}

/// Default in-group ratios `μ/λ` for the sparse group lasso.
pub fn default_mu_ratios() -> Vec<f64> {
    (5..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub synthetic: SyntheticConfig,
    pub methods: Vec<Method>,
    pub lambda_ratios: Vec<f64>,
    pub mu_ratios: Vec<f64>,
    pub folds: usize,
    pub options: SolveOptions,
    pub support_tol: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticConfig::default(),
            methods: vec![
                Method::Lasso,
                Method::GroupLasso,
                Method::SparseGroupLasso,
                Method::GroupKmaxPrior,
            ],
            lambda_ratios: default_lambda_ratios(),
            mu_ratios: default_mu_ratios(),
            folds: 10,
            options: SolveOptions::default(),
            support_tol: crate::experiments::metrics::DEFAULT_SUPPORT_TOL,
        }
    }
}

/// Scores of one method on one synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub seed: u64,
    pub m: usize,
    pub lambda: f64,
    pub mu: f64,
    pub k: Vec<usize>,
    pub cv_error: f64,
    pub rmse_pct: f64,
    pub cpr_pct: f64,
    pub nnz_overall: usize,
    pub nnz_groups: usize,
    pub false_nonzeros: usize,
    pub iterations: usize,
    pub wall_time: f64,
    pub estimate: Vec<f64>,
}

/// Mean scores of one method over repeats at one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub m: usize,
    pub repeats: usize,
    pub mean_cpr_pct: f64,
    pub mean_rmse_pct: f64,
    pub mean_nnz_overall: f64,
    pub mean_nnz_groups: f64,
    pub total_wall_time: f64,
}

#[derive(Clone)]
struct Fitted {
    cv: CvOutcome,
    fit: crate::SolveResult,
}

fn tune_and_fit(
    design: &GroupedDesign,
    template: &PenaltySpec,
    grid: &[f64],
    mu_ratios: Option<&[f64]>,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<Fitted> {
    let cv = cross_validate(design, template, grid, mu_ratios, cfg.folds, seed, &cfg.options)?;
    let fit = Solver::new(design, cfg.options.clone())?.solve(&cv.best)?;
    Ok(Fitted { cv, fit })
}

/// Generates the instance for `seed` and runs every configured method.
pub fn run_instance(cfg: &BenchConfig, seed: u64) -> Result<Vec<MethodRecord>> {
    let syn = cfg.synthetic.with_seed(seed);
    let (design, truth) = gen_synthetic(&syn)?;
    let grid = relative_grid(&design, &cfg.lambda_ratios);
    // fold assignment differs from the data seed but is tied to it
    let cv_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let tune = |template: &PenaltySpec, mu: Option<&[f64]>| {
        tune_and_fit(&design, template, &grid, mu, cfg, cv_seed)
    };

    // the lasso fit is shared with the lasso-initialized k-max method
    let mut lasso: Option<(Fitted, f64)> = None;
    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Stopwatch::start();
        if matches!(method, Method::Lasso | Method::GroupKmax) && lasso.is_none() {
            let f = tune(&Method::Lasso.template(vec![]), None)?;
            lasso = Some((f, start.seconds()));
        }
        let (fitted, wall_time) = match method {
            Method::Lasso => {
                let (f, t) = lasso.as_ref().expect("lasso fitted above");
                (f.clone(), *t)
            }
            Method::GroupKmax => {
                let (f, t) = lasso.as_ref().expect("lasso fitted above");
                let k = k_from_support(&f.fit.x);
                let before = start.seconds();
                let tuned = tune(&method.template(k), None)?;
                (tuned, t + start.seconds() - before)
            }
            Method::GroupKmaxPrior => {
                let f = tune(&method.template(syn.s.clone()), None)?;
                (f, start.seconds())
            }
            Method::GroupLasso => {
                let f = tune(&method.template(vec![]), None)?;
                (f, start.seconds())
            }
            Method::SparseGroupLasso => {
                let f = tune(&method.template(vec![]), Some(&cfg.mu_ratios))?;
                (f, start.seconds())
            }
        };
        let x = &fitted.fit.x;
        let (nnz_overall, nnz_groups) = sparsity_stats(x, cfg.support_tol);
        records.push(MethodRecord {
            method,
            seed,
            m: syn.m,
            lambda: fitted.cv.best.lambda,
            mu: fitted.cv.best.mu,
            k: fitted.cv.best.k.clone(),
            cv_error: fitted.cv.best_error(),
            rmse_pct: rmse_pct(x, &truth)?,
            cpr_pct: cpr_pct(x, &truth, cfg.support_tol)?,
            nnz_overall,
            nnz_groups,
            false_nonzeros: false_nonzeros(x, &truth, cfg.support_tol)?,
            iterations: fitted.fit.iterations,
            wall_time,
            estimate: x.as_slice().to_vec(),
        });
    }
    Ok(records)
}

/// Runs `repeats` instances with seeds `base_seed, base_seed + 1, …`.
pub fn run_repeats(cfg: &BenchConfig, repeats: usize, base_seed: u64) -> Result<Vec<MethodRecord>> {
    let mut all = Vec::new();
    for r in 0..repeats as u64 {
        all.extend(run_instance(cfg, base_seed.wrapping_add(r))?);
    }
    Ok(all)
}

/// Per `(m, method)` means, ordered by `m` then by method.
pub fn aggregate(records: &[MethodRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, Method)> = records.iter().map(|r| (r.m, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(m, method)| {
            let rows: Vec<&MethodRecord> = records
                .iter()
                .filter(|r| r.m == m && r.method == method)
                .collect();
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&MethodRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            AggregateRow {
                method,
                m,
                repeats: rows.len(),
                mean_cpr_pct: mean(&|r| r.cpr_pct),
                mean_rmse_pct: mean(&|r| r.rmse_pct),
                mean_nnz_overall: mean(&|r| r.nnz_overall as f64),
                mean_nnz_groups: mean(&|r| r.nnz_groups as f64),
                total_wall_time: rows.iter().map(|r| r.wall_time).sum(),
            }
        })
        .collect()
}
