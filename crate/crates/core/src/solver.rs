//! Iterative soft thresholding for the four penalty kinds.
//!
//! Every method shares the same loop: a gradient step on the least-squares
//! term using the full residual, followed by the penalty's per-group
//! shrinkage with threshold `γλ`. The loop stops once the summed per-group
//! change between consecutive iterates drops to `tol`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::model::{GroupedDesign, GroupedVector, PenaltyKind, PenaltySpec};
use crate::prox;

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// Unit step, as in the unscaled iteration; requires `‖Φ‖ ≤ 1` to be safe.
    Unit,
    /// Step `1/L` with `L` the largest eigenvalue of `ΦᵀΦ`.
    #[default]
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub step_mode: StepMode,
    /// Keep the objective value and every iterate.
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-4,
            step_mode: StepMode::Lipschitz,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: GroupedVector,
    pub iterations: usize,
    pub terminated_by: Termination,
    /// Step size `γ` the iteration used.
    pub step: f64,
    /// `Σ_i ‖x_i^(t) − x_i^(t−1)‖₂` for `t = 1..=iterations`.
    pub iterate_gap_trace: Vec<f64>,
    /// Objective at `x^(0), …, x^(iterations)`; empty unless traced.
    pub objective_trace: Vec<f64>,
    /// `x^(0), …, x^(iterations)`; empty unless traced.
    pub iterates: Vec<GroupedVector>,
    pub wall_time: f64,
}

impl SolveResult {
    pub fn final_gap(&self) -> f64 {
        self.iterate_gap_trace.last().copied().unwrap_or(0.0)
    }
}

/// Power-iteration estimate of the largest eigenvalue of `ΦᵀΦ`.
///
/// Stops once consecutive Rayleigh quotients agree to a relative `1e-6`.
/// A zero design is rejected since no finite step follows from it.
pub fn lipschitz_estimate(design: &GroupedDesign) -> Result<f64> {
    let phi = design.matrix();
    let d = phi.ncols();
    // fixed seed so repeated calls agree
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(d, |_, _| rng.gen_range(0.5..1.5));
    v /= v.norm();
    let mut av = DVector::zeros(phi.nrows());
    let mut w = DVector::zeros(d);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_STEPS {
        av.gemv(1.0, phi, &v, 0.0);
        w.gemv_tr(1.0, phi, &av, 0.0);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::PowerIteration {
                steps: 0,
                best: estimate,
            });
        }
        v.copy_from(&w);
        v /= norm;
        let converged = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        if converged {
            return Ok(estimate);
        }
    }
    Err(Error::PowerIteration {
        steps: POWER_MAX_STEPS,
        best: estimate,
    })
}

/// Step size for `mode`. A non-converged power iteration still yields its
/// best estimate, which is a lower bound close to the true value.
pub fn step_size(design: &GroupedDesign, mode: StepMode) -> f64 {
    match mode {
        StepMode::Unit => 1.0,
        StepMode::Lipschitz => match lipschitz_estimate(design) {
            Ok(l) => 1.0 / l,
            Err(Error::PowerIteration { best, .. }) if best > 0.0 => 1.0 / best,
            Err(_) => 1.0,
        },
    }
}

/// Applies the penalty's shrinkage to every group of `u` with step `gamma`.
pub(crate) struct Shrinker<'a> {
    penalty: &'a PenaltySpec,
    weights: Vec<f64>,
    gamma: f64,
    scratch: Vec<f64>,
}

impl<'a> Shrinker<'a> {
    pub(crate) fn new(design: &GroupedDesign, penalty: &'a PenaltySpec, gamma: f64) -> Result<Self> {
        penalty.validate(design.structure())?;
        Ok(Self {
            penalty,
            weights: penalty.weights(design.structure()),
            gamma,
            scratch: Vec::new(),
        })
    }

    pub(crate) fn apply(&mut self, u: &mut GroupedVector) -> Result<()> {
        let p = self.penalty;
        let tau = self.gamma * p.lambda;
        for i in 0..u.num_groups() {
            let block = u.block_mut(i);
            match p.kind {
                PenaltyKind::Lasso => prox::soft_threshold_in_place(block, tau)?,
                PenaltyKind::GroupLasso => {
                    prox::block_shrink_in_place(block, tau * self.weights[i])?
                }
                PenaltyKind::SparseGroupLasso => prox::sparse_group_shrink_in_place(
                    block,
                    tau * self.weights[i],
                    self.gamma * p.mu,
                )?,
                PenaltyKind::GroupKmax => prox::kmax_shrink_in_place(
                    block,
                    p.k[i],
                    tau,
                    p.convention,
                    &mut self.scratch,
                )?,
            }
        }
        Ok(())
    }
}

/// Gradient-step point `u = x + γ Φᵀ(y − Φx)`; also returns the residual.
pub(crate) fn forward_point(
    design: &GroupedDesign,
    x: &GroupedVector,
    gamma: f64,
) -> (GroupedVector, DVector<f64>) {
    let mut r = design.response().clone();
    r.gemv(-1.0, design.matrix(), x.flat(), 1.0);
    let mut u = x.clone();
    u.flat_mut().gemv_tr(gamma, design.matrix(), &r, 1.0);
    (u, r)
}

/// Solver bound to one design, with the step size computed once.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    design: &'a GroupedDesign,
    options: SolveOptions,
    step: f64,
}

impl<'a> Solver<'a> {
    pub fn new(design: &'a GroupedDesign, options: SolveOptions) -> Result<Self> {
        options.validate()?;
        let step = step_size(design, options.step_mode);
        Ok(Self {
            design,
            options,
            step,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn options(&self) -> &SolveOptions {
        &self.options
    }

    /// Cold start from `x^(0) = γ Φᵀy`.
    pub fn solve(&self, penalty: &PenaltySpec) -> Result<SolveResult> {
        let mut x0 = GroupedVector::zeros(self.design.structure());
        x0.flat_mut()
            .gemv_tr(self.step, self.design.matrix(), self.design.response(), 0.0);
        self.run(penalty, x0)
    }

    /// Warm start from `init`.
    pub fn solve_from(&self, penalty: &PenaltySpec, init: &GroupedVector) -> Result<SolveResult> {
        self.design.check_vector(init)?;
        self.run(penalty, init.clone())
    }

    /// One solve per `lambda`, in the given order, each warm-started from the
    /// previous solution when `warm_start` is set.
    pub fn path(
        &self,
        template: &PenaltySpec,
        lambdas: &[f64],
        warm_start: bool,
    ) -> Result<Vec<SolveResult>> {
        if lambdas.is_empty() {
            return Err(Error::arg("lambda grid is empty"));
        }
        let mut out: Vec<SolveResult> = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let penalty = template.with_lambda(lambda);
            let res = match out.last() {
                Some(prev) if warm_start => self.solve_from(&penalty, &prev.x)?,
                _ => self.solve(&penalty)?,
            };
            out.push(res);
        }
        Ok(out)
    }

    fn run(&self, penalty: &PenaltySpec, mut x: GroupedVector) -> Result<SolveResult> {
        let start = Stopwatch::start();
        let design = self.design;
        let gamma = self.step;
        let opts = &self.options;
        let mut shrinker = Shrinker::new(design, penalty, gamma)?;

        let mut gaps = Vec::new();
        let mut objectives = Vec::new();
        let mut iterates = Vec::new();
        if opts.record_trace {
            iterates.push(x.clone());
        }

        let mut iterations = 0;
        let terminated_by = loop {
            let (mut u, r) = forward_point(design, &x, gamma);
            if opts.record_trace {
                objectives.push(0.5 * r.norm_squared() + penalty.value(&x)?);
            }
            shrinker.apply(&mut u)?;
            iterations += 1;
            if u.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    iteration: iterations,
                });
            }
            let gap = u.group_distance(&x);
            gaps.push(gap);
            x = u;
            if opts.record_trace {
                iterates.push(x.clone());
            }
            if gap <= opts.tol {
                break Termination::Tolerance;
            }
            if iterations >= opts.max_iters {
                break Termination::MaxIters;
            }
        };
        if opts.record_trace {
            let r = crate::model::residual(design, &x)?;
            objectives.push(0.5 * r.norm_squared() + penalty.value(&x)?);
        }

        Ok(SolveResult {
            x,
            iterations,
            terminated_by,
            step: gamma,
            iterate_gap_trace: gaps,
            objective_trace: objectives,
            iterates,
            wall_time: start.seconds(),
        })
    }
}

pub fn solve(
    design: &GroupedDesign,
    penalty: &PenaltySpec,
    options: &SolveOptions,
) -> Result<SolveResult> {
    Solver::new(design, options.clone())?.solve(penalty)
}

/// Regularization path with warm starts.
pub fn solve_path(
    design: &GroupedDesign,
    template: &PenaltySpec,
    lambdas: &[f64],
    options: &SolveOptions,
) -> Result<Vec<SolveResult>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidPenalty(format!("lambda {l} is negative")));
    }
    Solver::new(design, options.clone())?.path(template, lambdas, true)
}
