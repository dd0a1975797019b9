//! Certificates for candidate solutions of the k-max problem.
//!
//! A point `x` is stationary when it reproduces itself under one
//! gradient-plus-shrinkage step. It is certified locally optimal when, in
//! addition, the free entries of `u = x + γΦᵀ(y − Φx)` clear the penalized
//! ones by more than the threshold `γλ` in every group.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{objective, GroupedDesign, GroupedVector, PenaltyKind, PenaltySpec};
use crate::prox;
use crate::solver::{forward_point, Shrinker};

pub const DEFAULT_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub gamma: f64,
    pub tolerance: f64,
    pub margin: f64,
    /// `Σ_i ‖x_i − S_i(u_i)‖₂`.
    pub stationary_gap: f64,
    /// `t⁺ − t − γλ` per group; `None` where the condition holds vacuously.
    pub theorem2_gap_per_group: Vec<Option<f64>>,
    /// Groups with no free or no penalized entries.
    pub vacuous_groups: Vec<usize>,
    /// Groups where several entries of `u` tie at the penalized threshold.
    pub tied_groups: Vec<usize>,
    pub fixed_point_ok: bool,
    pub strict_gap_ok: bool,
    pub perturbation_ok: Option<bool>,
}

impl OptimalityReport {
    pub fn certified(&self) -> bool {
        self.fixed_point_ok && self.strict_gap_ok
    }
}

/// `Σ_i ‖x_i − S_i(x_i + γΦ_iᵀ(y − Σ_j Φ_j x_j))‖₂` where `S_i` is the
/// penalty's shrinkage at threshold `γλ`.
pub fn stationary_residual(
    design: &GroupedDesign,
    x: &GroupedVector,
    penalty: &PenaltySpec,
    gamma: f64,
) -> Result<f64> {
    design.check_vector(x)?;
    check_gamma(gamma)?;
    let (mut u, _) = forward_point(design, x, gamma);
    Shrinker::new(design, penalty, gamma)?.apply(&mut u)?;
    Ok(u.group_distance(x))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("step must be positive, got {gamma}")))
    }
}

struct GroupGap {
    gap: Option<f64>,
    tied: bool,
}

fn group_gap(u: &[f64], k: usize, penalty: &PenaltySpec, tau: f64) -> Result<GroupGap> {
    let Some(part) = prox::penalized_partition(u, k, penalty.convention)? else {
        return Ok(GroupGap {
            gap: None,
            tied: false,
        });
    };
    let tied = part.eq_set.len() > 1;
    if part.plus_set.is_empty() {
        return Ok(GroupGap { gap: None, tied });
    }
    let t_plus = part
        .plus_set
        .iter()
        .map(|&j| u[j].abs())
        .fold(f64::INFINITY, f64::min);
    Ok(GroupGap {
        gap: Some(t_plus - part.threshold - tau),
        tied,
    })
}

/// Checks the fixed-point equation and the strict separation `t⁺ > t + γλ`
/// in every group. Only defined for the group k-max penalty.
pub fn check_theorem2(
    design: &GroupedDesign,
    x: &GroupedVector,
    penalty: &PenaltySpec,
    gamma: f64,
    tolerance: f64,
    margin: f64,
) -> Result<OptimalityReport> {
    if penalty.kind != PenaltyKind::GroupKmax {
        return Err(Error::InvalidPenalty(
            "local optimality certificates apply to the group k-max penalty only".into(),
        ));
    }
    if !(tolerance >= 0.0) || !(margin >= 0.0) {
        return Err(Error::arg("tolerance and margin must be nonnegative"));
    }
    design.check_vector(x)?;
    check_gamma(gamma)?;
    penalty.validate(design.structure())?;

    let (u, _) = forward_point(design, x, gamma);
    let mut shrunk = u.clone();
    Shrinker::new(design, penalty, gamma)?.apply(&mut shrunk)?;
    let stationary_gap = shrunk.group_distance(x);

    let tau = gamma * penalty.lambda;
    let mut gaps = Vec::with_capacity(x.num_groups());
    let mut vacuous = Vec::new();
    let mut tied = Vec::new();
    for (i, block) in u.blocks().enumerate() {
        let g = group_gap(block, penalty.k[i], penalty, tau)?;
        if g.gap.is_none() {
            vacuous.push(i);
        }
        if g.tied {
            tied.push(i);
        }
        gaps.push(g.gap);
    }
    let strict_gap_ok = gaps.iter().flatten().all(|&g| g > margin);

    Ok(OptimalityReport {
        gamma,
        tolerance,
        margin,
        stationary_gap,
        theorem2_gap_per_group: gaps,
        vacuous_groups: vacuous,
        tied_groups: tied,
        fixed_point_ok: stationary_gap <= tolerance,
        strict_gap_ok,
        perturbation_ok: None,
    })
}

/// Samples `samples` perturbations uniformly from the ball of `radius` and
/// reports whether none of them lowers the objective by more than `1e-12`.
pub fn perturbation_oracle(
    design: &GroupedDesign,
    x: &GroupedVector,
    penalty: &PenaltySpec,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    if !(radius > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {radius}")));
    }
    let base = objective(design, x, penalty)?;
    let d = x.flat().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0);
    for _ in 0..samples {
        let mut delta: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = radius * unit.sample(&mut rng).powf(1.0 / d as f64) / norm;
        delta.iter_mut().for_each(|v| *v *= scale);
        let mut moved = x.clone();
        moved
            .flat_mut()
            .iter_mut()
            .zip(&delta)
            .for_each(|(a, b)| *a += b);
        if objective(design, &moved, penalty)? < base - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}
