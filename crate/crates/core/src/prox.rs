//! Shrinkage operators and the k-max index sets.
//!
//! For a group `x` of length `d` and an order `k`, `t_k` is the `k`-th
//! largest magnitude among the entries (with multiplicity). The entries are
//! split into those strictly above `t_k`, those tied with it and those
//! strictly below it; the tied and lower entries together form the `leq`
//! set. The k-max penalty is the l1 norm of the entries in a `leq` set and
//! the k-max shrinkage soft-thresholds exactly those entries, leaving the
//! larger ones untouched. Which order the penalized `leq` set is taken at is
//! fixed by [`KmaxConvention`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KmaxConvention;

/// Index sets of one group relative to its `k`-th largest magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPartition {
    /// The `k`-th largest magnitude; `+∞` for `k = 0`.
    pub threshold: f64,
    pub eq_set: Vec<usize>,
    pub plus_set: Vec<usize>,
    pub minus_set: Vec<usize>,
    pub leq_set: Vec<usize>,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && !tau.is_nan() {
        Ok(())
    } else {
        Err(Error::arg(format!("threshold must be nonnegative, got {tau}")))
    }
}

fn descending(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

/// `k`-th largest magnitude using `scratch` as the selection buffer.
/// Expected linear time; `1 <= k <= x.len()` is the caller's job.
fn select_kth_abs(x: &[f64], k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(x.iter().map(|v| v.abs()));
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, descending);
    *kth
}

/// The `k`-th largest absolute value of `x`, counted with multiplicity.
pub fn kth_max_abs(x: &[f64], k: usize) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::arg("empty vector"));
    }
    if k == 0 || k > x.len() {
        return Err(Error::arg(format!("k = {k} outside [1, {}]", x.len())));
    }
    Ok(select_kth_abs(x, k, &mut Vec::with_capacity(x.len())))
}

/// Splits the indices of `x` around its `k`-th largest magnitude.
///
/// `k = 0` puts every index in the `leq` set with an infinite threshold.
pub fn partition_indices(x: &[f64], k: usize) -> Result<IndexPartition> {
    if k > x.len() {
        return Err(Error::arg(format!("k = {k} outside [0, {}]", x.len())));
    }
    if k == 0 {
        return Ok(IndexPartition {
            threshold: f64::INFINITY,
            eq_set: Vec::new(),
            plus_set: Vec::new(),
            minus_set: (0..x.len()).collect(),
            leq_set: (0..x.len()).collect(),
        });
    }
    let t = kth_max_abs(x, k)?;
    let mut p = IndexPartition {
        threshold: t,
        eq_set: Vec::new(),
        plus_set: Vec::new(),
        minus_set: Vec::new(),
        leq_set: Vec::new(),
    };
    for (j, v) in x.iter().enumerate() {
        let a = v.abs();
        if a > t {
            p.plus_set.push(j);
        } else {
            if a == t {
                p.eq_set.push(j);
            } else {
                p.minus_set.push(j);
            }
            p.leq_set.push(j);
        }
    }
    Ok(p)
}

/// Magnitude at or below which entries are penalized. `None` means the group
/// is left entirely unpenalized.
fn penalized_threshold(
    x: &[f64],
    k: usize,
    convention: KmaxConvention,
    scratch: &mut Vec<f64>,
) -> Result<Option<f64>> {
    let d = x.len();
    if k > d {
        return Err(Error::arg(format!("k = {k} outside [0, {d}]")));
    }
    if k == 0 {
        return Ok(Some(f64::INFINITY));
    }
    Ok(match convention {
        KmaxConvention::KeepTopK if k == d => None,
        KmaxConvention::KeepTopK => Some(select_kth_abs(x, k + 1, scratch)),
        KmaxConvention::Literal => Some(select_kth_abs(x, k, scratch)),
    })
}

/// Index sets that the k-max penalty acts on, under `convention`.
///
/// Under `KeepTopK` this is the partition of order `k + 1` (nothing is
/// penalized when `k = d`); under `Literal` it is the partition of order `k`.
pub fn penalized_partition(
    x: &[f64],
    k: usize,
    convention: KmaxConvention,
) -> Result<Option<IndexPartition>> {
    if k > x.len() {
        return Err(Error::arg(format!("k = {k} outside [0, {}]", x.len())));
    }
    match convention {
        KmaxConvention::KeepTopK if k == x.len() => Ok(None),
        KmaxConvention::KeepTopK if k > 0 => partition_indices(x, k + 1).map(Some),
        _ => partition_indices(x, k).map(Some),
    }
}

/// Sparse group k-max penalty of one group under the default convention.
pub fn kmax_penalty(x: &[f64], k: usize) -> Result<f64> {
    kmax_penalty_with(x, k, KmaxConvention::default())
}

pub fn kmax_penalty_with(x: &[f64], k: usize, convention: KmaxConvention) -> Result<f64> {
    let t = penalized_threshold(x, k, convention, &mut Vec::with_capacity(x.len()))?;
    Ok(match t {
        None => 0.0,
        Some(t) => x.iter().map(|v| v.abs()).filter(|&a| a <= t).sum(),
    })
}

/// Group k-max soft shrinkage under the default convention.
pub fn kmax_shrink(x: &[f64], k: usize, tau: f64) -> Result<Vec<f64>> {
    kmax_shrink_with(x, k, tau, KmaxConvention::default())
}

pub fn kmax_shrink_with(
    x: &[f64],
    k: usize,
    tau: f64,
    convention: KmaxConvention,
) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    kmax_shrink_in_place(&mut out, k, tau, convention, &mut Vec::with_capacity(x.len()))?;
    Ok(out)
}

/// In-place k-max shrinkage; `scratch` is reused across calls to avoid
/// allocating in the solver loop.
pub fn kmax_shrink_in_place(
    x: &mut [f64],
    k: usize,
    tau: f64,
    convention: KmaxConvention,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    check_tau(tau)?;
    if let Some(t) = penalized_threshold(x, k, convention, scratch)? {
        for v in x.iter_mut() {
            if v.abs() <= t {
                *v = shrink_scalar(*v, tau);
            }
        }
    }
    Ok(())
}

#[inline]
fn shrink_scalar(v: f64, tau: f64) -> f64 {
    if v.abs() <= tau {
        0.0
    } else {
        v - tau * v.signum()
    }
}

/// Entrywise soft threshold `sgn(x)·max(|x| − tau, 0)`.
pub fn soft_threshold(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    soft_threshold_in_place(&mut out, tau)?;
    Ok(out)
}

pub fn soft_threshold_in_place(x: &mut [f64], tau: f64) -> Result<()> {
    check_tau(tau)?;
    for v in x.iter_mut() {
        *v = shrink_scalar(*v, tau);
    }
    Ok(())
}

/// Block shrinkage `max(1 − tau/‖x‖₂, 0)·x`.
pub fn block_shrink(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    block_shrink_in_place(&mut out, tau)?;
    Ok(out)
}

pub fn block_shrink_in_place(x: &mut [f64], tau: f64) -> Result<()> {
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(());
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let factor = if norm <= tau { 0.0 } else { 1.0 - tau / norm };
    for v in x.iter_mut() {
        *v *= factor;
    }
    Ok(())
}

/// Soft threshold at `tau_l1` followed by block shrinkage at `tau_group`.
pub fn sparse_group_shrink(x: &[f64], tau_group: f64, tau_l1: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    sparse_group_shrink_in_place(&mut out, tau_group, tau_l1)?;
    Ok(out)
}

pub fn sparse_group_shrink_in_place(x: &mut [f64], tau_group: f64, tau_l1: f64) -> Result<()> {
    check_tau(tau_group)?;
    soft_threshold_in_place(x, tau_l1)?;
    block_shrink_in_place(x, tau_group)
}
