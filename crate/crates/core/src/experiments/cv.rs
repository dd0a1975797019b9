//! K-fold cross-validation over `(λ, μ)` grids and the lasso-based choice of
//! per-group `k`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::metrics::DEFAULT_SUPPORT_TOL;
use crate::model::{predict, GroupedDesign, GroupedVector, PenaltyKind, PenaltySpec};
use crate::solver::{SolveOptions, Solver};

/// Held-out rows for each fold: a seeded shuffle of `0..n` cut into
/// contiguous blocks whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    held_out: Vec<Vec<usize>>,
    n: usize,
}

impl FoldPlan {
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
        }
        if folds > n {
            return Err(Error::arg(format!("{folds} folds exceed {n} observations")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (base, extra) = (n / folds, n % folds);
        let mut held_out = Vec::with_capacity(folds);
        let mut start = 0;
        for f in 0..folds {
            let len = base + usize::from(f < extra);
            let mut rows = order[start..start + len].to_vec();
            rows.sort_unstable();
            held_out.push(rows);
            start += len;
        }
        Ok(Self { held_out, n })
    }

    pub fn num_folds(&self) -> usize {
        self.held_out.len()
    }

    pub fn held_out(&self, fold: usize) -> &[usize] {
        &self.held_out[fold]
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut mask = vec![true; self.n];
        for &r in &self.held_out[fold] {
            mask[r] = false;
        }
        (0..self.n).filter(|&r| mask[r]).collect()
    }
}

/// Smallest λ at which the lasso solution is zero: `‖Φᵀy‖_∞`.
pub fn lambda_max(design: &GroupedDesign) -> f64 {
    design.matrix().tr_mul(design.response()).amax()
}

/// `ratio · λ_max` for every ratio.
pub fn relative_grid(design: &GroupedDesign, ratios: &[f64]) -> Vec<f64> {
    let lmax = lambda_max(design);
    ratios.iter().map(|r| r * lmax).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub mu: f64,
    pub mean_error: f64,
    pub fold_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: PenaltySpec,
    pub best_cell: usize,
    pub cells: Vec<CvCell>,
}

impl CvOutcome {
    pub fn best_error(&self) -> f64 {
        self.cells[self.best_cell].mean_error
    }
}

/// Mean held-out squared prediction error for every grid cell.
///
/// `mu_ratios` only applies to the sparse group lasso and sets `μ = ratio·λ`
/// per cell; without it the template's `μ` is kept. Within each fold the λ
/// values are visited from largest to smallest with warm starts. The winning
/// cell has the lowest mean error, ties going to larger λ and then larger μ.
pub fn cross_validate(
    design: &GroupedDesign,
    template: &PenaltySpec,
    lambda_grid: &[f64],
    mu_ratios: Option<&[f64]>,
    folds: usize,
    seed: u64,
    options: &SolveOptions,
) -> Result<CvOutcome> {
    if lambda_grid.is_empty() {
        return Err(Error::arg("lambda grid is empty"));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidPenalty(format!("lambda {l} is invalid")));
    }
    let mu_ratios: Vec<Option<f64>> = match mu_ratios {
        Some([]) => return Err(Error::arg("mu grid is empty")),
        Some(r) if template.kind == PenaltyKind::SparseGroupLasso => r.iter().map(|&v| Some(v)).collect(),
        _ => vec![None],
    };
    template.validate(design.structure())?;
    let plan = FoldPlan::new(design.n_samples(), folds, seed)?;

    let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
    order.sort_by(|&a, &b| lambda_grid[b].total_cmp(&lambda_grid[a]));

    let nl = lambda_grid.len();
    let mut errors = vec![vec![0.0; plan.num_folds()]; nl * mu_ratios.len()];
    for fold in 0..plan.num_folds() {
        let train = design.select_rows(&plan.training(fold))?;
        let test = design.select_rows(plan.held_out(fold))?;
        let solver = Solver::new(&train, options.clone())?;
        for (mi, ratio) in mu_ratios.iter().enumerate() {
            let mut warm = None;
            for &li in &order {
                let lambda = lambda_grid[li];
                let mut penalty = template.with_lambda(lambda);
                if let Some(r) = ratio {
                    penalty.mu = r * lambda;
                }
                let res = match &warm {
                    Some(x) => solver.solve_from(&penalty, x)?,
                    None => solver.solve(&penalty)?,
                };
                let pred = predict(&test, &res.x)?;
                let mse = (test.response() - pred).norm_squared() / test.n_samples() as f64;
                errors[mi * nl + li][fold] = mse;
                warm = Some(res.x);
            }
        }
    }

    let mut cells = Vec::with_capacity(errors.len());
    for (mi, ratio) in mu_ratios.iter().enumerate() {
        for (li, &lambda) in lambda_grid.iter().enumerate() {
            let fold_errors = errors[mi * nl + li].clone();
            let mean_error = fold_errors.iter().sum::<f64>() / fold_errors.len() as f64;
            cells.push(CvCell {
                lambda,
                mu: ratio.map_or(template.mu, |r| r * lambda),
                mean_error,
                fold_errors,
            });
        }
    }
    let best_cell = (0..cells.len())
        .min_by(|&a, &b| {
            let (ca, cb) = (&cells[a], &cells[b]);
            ca.mean_error
                .total_cmp(&cb.mean_error)
                .then(cb.lambda.total_cmp(&ca.lambda))
                .then(cb.mu.total_cmp(&ca.mu))
        })
        .expect("grid is nonempty");
    let mut best = template.with_lambda(cells[best_cell].lambda);
    best.mu = cells[best_cell].mu;
    Ok(CvOutcome {
        best,
        best_cell,
        cells,
    })
}

/// Per-group nonzero counts of the cross-validated lasso fit on the full
/// data, which then serve as `k` for the k-max penalty.
pub fn init_k_from_lasso(
    design: &GroupedDesign,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    options: &SolveOptions,
) -> Result<Vec<usize>> {
    let cv = cross_validate(design, &PenaltySpec::lasso(0.0), lambda_grid, None, folds, seed, options)?;
    let fit = Solver::new(design, options.clone())?.solve(&cv.best)?;
    Ok(k_from_support(&fit.x))
}

/// Nonzeros per group above the default support tolerance.
pub fn k_from_support(x: &GroupedVector) -> Vec<usize> {
    x.blocks()
        .map(|b| b.iter().filter(|v| v.abs() > DEFAULT_SUPPORT_TOL).count())
        .collect()
}
