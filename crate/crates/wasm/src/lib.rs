//! Browser bindings for the demo page in `www/`.
//!
//! The exported functions are thin wrappers; the plain-Rust versions in
//! [`demo`] do the work and are what the native tests call.

use wasm_bindgen::prelude::*;

pub mod demo {
    use serde::Serialize;
    use sgkmax::experiments::bench::{log_grid, Method};
    use sgkmax::experiments::{cpr_pct, false_nonzeros, gen_synthetic, lambda_max, rmse_pct, sparsity_stats, SyntheticConfig};
    use sgkmax::prox::{kmax_penalty_with, kmax_shrink_with, penalized_partition};
    use sgkmax::{GroupedDesign, GroupedVector, KmaxConvention, PenaltySpec, SolveOptions, Solver};

    fn convention(literal: bool) -> KmaxConvention {
        if literal {
            KmaxConvention::Literal
        } else {
            KmaxConvention::KeepTopK
        }
    }

    #[derive(Debug, Serialize)]
    pub struct ShrinkView {
        pub shrunk: Vec<f64>,
        pub penalized: Vec<usize>,
        pub penalty: f64,
    }

    pub fn shrink(values: &[f64], k: usize, tau: f64, literal: bool) -> Result<ShrinkView, String> {
        let conv = convention(literal);
        let shrunk = kmax_shrink_with(values, k, tau, conv).map_err(|e| e.to_string())?;
        let penalized = penalized_partition(values, k, conv)
            .map_err(|e| e.to_string())?
            .map(|p| p.leq_set)
            .unwrap_or_default();
        let penalty = kmax_penalty_with(values, k, conv).map_err(|e| e.to_string())?;
        Ok(ShrinkView {
            shrunk,
            penalized,
            penalty,
        })
    }

    fn instance(seed: u64) -> Result<(SyntheticConfig, GroupedDesign, GroupedVector), String> {
        let cfg = SyntheticConfig::default().with_seed(seed);
        let (design, truth) = gen_synthetic(&cfg).map_err(|e| e.to_string())?;
        Ok((cfg, design, truth))
    }

    fn template(method: &str, cfg: &SyntheticConfig) -> Result<PenaltySpec, String> {
        let m: Method = method.parse().map_err(|e: sgkmax::Error| e.to_string())?;
        match m {
            // no cross-validated lasso here, so both k-max variants use the true k
            Method::GroupKmax | Method::GroupKmaxPrior => Ok(PenaltySpec::group_kmax(0.0, cfg.s.clone())),
            Method::SparseGroupLasso => Ok(PenaltySpec::sparse_group_lasso(0.0, 0.0)),
            other => Ok(other.template(Vec::new())),
        }
    }

    fn at(template: &PenaltySpec, lambda: f64) -> PenaltySpec {
        let mut p = template.with_lambda(lambda);
        if p.kind == sgkmax::PenaltyKind::SparseGroupLasso {
            p.mu = 0.75 * lambda;
        }
        p
    }

    #[derive(Debug, Serialize)]
    pub struct Recovery {
        pub lambda: f64,
        pub group_size: usize,
        pub truth: Vec<f64>,
        pub estimate: Vec<f64>,
        pub iterations: usize,
        pub rmse_pct: f64,
        pub cpr_pct: f64,
        pub false_nonzeros: usize,
    }

    /// Fit on the default synthetic instance at `ratio · λ_max`.
    pub fn recover(seed: u64, ratio: f64, method: &str) -> Result<Recovery, String> {
        let (cfg, design, truth) = instance(seed)?;
        let lambda = ratio * lambda_max(&design);
        let p = at(&template(method, &cfg)?, lambda);
        let res = Solver::new(&design, SolveOptions::default())
            .and_then(|s| s.solve(&p))
            .map_err(|e| e.to_string())?;
        let tol = 1e-3;
        Ok(Recovery {
            lambda,
            group_size: cfg.d_per_group,
            truth: truth.as_slice().to_vec(),
            estimate: res.x.as_slice().to_vec(),
            iterations: res.iterations,
            rmse_pct: rmse_pct(&res.x, &truth).map_err(|e| e.to_string())?,
            cpr_pct: cpr_pct(&res.x, &truth, tol).map_err(|e| e.to_string())?,
            false_nonzeros: false_nonzeros(&res.x, &truth, tol).map_err(|e| e.to_string())?,
        })
    }

    #[derive(Debug, Serialize)]
    pub struct PathView {
        pub ratios: Vec<f64>,
        pub nnz_overall: Vec<usize>,
        pub nnz_groups: Vec<usize>,
        pub rmse_pct: Vec<f64>,
    }

    /// Warm-started sweep from λ_max down to `1e-3 · λ_max`.
    pub fn path(seed: u64, method: &str, points: usize) -> Result<PathView, String> {
        if points < 2 {
            return Err("need at least two grid points".into());
        }
        let (cfg, design, truth) = instance(seed)?;
        let template = template(method, &cfg)?;
        let mut ratios = log_grid(1e-3, 1.0, points);
        ratios.reverse();
        let lmax = lambda_max(&design);
        let solver = Solver::new(&design, SolveOptions::default()).map_err(|e| e.to_string())?;
        let mut view = PathView {
            ratios: ratios.clone(),
            nnz_overall: Vec::new(),
            nnz_groups: Vec::new(),
            rmse_pct: Vec::new(),
        };
        let mut prev: Option<GroupedVector> = None;
        for r in ratios {
            let p = at(&template, r * lmax);
            let res = match &prev {
                Some(x) => solver.solve_from(&p, x),
                None => solver.solve(&p),
            }
            .map_err(|e| e.to_string())?;
            let (o, g) = sparsity_stats(&res.x, 1e-6);
            view.nnz_overall.push(o);
            view.nnz_groups.push(g);
            view.rmse_pct.push(rmse_pct(&res.x, &truth).map_err(|e| e.to_string())?);
            prev = Some(res.x);
        }
        Ok(view)
    }
}

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON `{shrunk, penalized, penalty}`.
#[wasm_bindgen]
pub fn shrink(values: &[f64], k: usize, tau: f64, literal: bool) -> Result<String, JsError> {
    to_js(demo::shrink(values, k, tau, literal))
}

/// JSON with truth, estimate and scores.
#[wasm_bindgen]
pub fn recover(seed: u32, ratio: f64, method: &str) -> Result<String, JsError> {
    to_js(demo::recover(seed.into(), ratio, method))
}

/// JSON `{ratios, nnz_overall, nnz_groups, rmse_pct}`.
#[wasm_bindgen]
pub fn path(seed: u32, method: &str, points: usize) -> Result<String, JsError> {
    to_js(demo::path(seed.into(), method, points))
}
