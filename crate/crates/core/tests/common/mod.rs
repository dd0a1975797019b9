//! Full-sort reference implementations of the k-max machinery and small
//! instance generators shared by the integration tests.
#![allow(dead_code)]

pub mod props;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgkmax::{GroupedDesign, KmaxConvention};

/// Magnitudes sorted from largest to smallest.
pub fn sorted_abs_desc(x: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.partial_cmp(p).unwrap());
    a
}

pub fn ref_kth_max(x: &[f64], k: usize) -> f64 {
    sorted_abs_desc(x)[k - 1]
}

/// (threshold, eq, plus, minus, leq) by direct comparison with the sorted
/// magnitudes.
pub fn ref_partition(x: &[f64], k: usize) -> (f64, Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let t = if k == 0 { f64::INFINITY } else { ref_kth_max(x, k) };
    let idx = |pred: &dyn Fn(f64) -> bool| -> Vec<usize> {
        (0..x.len()).filter(|&j| pred(x[j].abs())).collect()
    };
    (
        t,
        idx(&|a| a == t),
        idx(&|a| a > t),
        idx(&|a| a < t),
        idx(&|a| a <= t),
    )
}

/// Penalized indices: everything outside the `k` largest magnitudes, ties
/// with the `(k+1)`-th counted as penalized (or the literal order-`k` set).
pub fn ref_penalized(x: &[f64], k: usize, convention: KmaxConvention) -> Vec<usize> {
    let d = x.len();
    let order = match convention {
        KmaxConvention::KeepTopK if k == d => return Vec::new(),
        KmaxConvention::KeepTopK if k > 0 => k + 1,
        _ => k,
    };
    ref_partition(x, order).4
}

pub fn ref_penalty(x: &[f64], k: usize, convention: KmaxConvention) -> f64 {
    ref_penalized(x, k, convention)
        .into_iter()
        .map(|j| x[j].abs())
        .sum()
}

pub fn ref_shrink(x: &[f64], k: usize, tau: f64, convention: KmaxConvention) -> Vec<f64> {
    let pen = ref_penalized(x, k, convention);
    let mut out = x.to_vec();
    for j in pen {
        let v = x[j];
        out[j] = if v.abs() < tau {
            0.0
        } else if v.abs() == tau {
            0.0
        } else {
            v - tau * v.signum()
        };
    }
    out
}

/// Random vector with repeated magnitudes and zeros mixed in.
pub fn random_vector_with_ties(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let pool: Vec<f64> = (0..rng.gen_range(1..=d)).map(|_| rng.gen_range(-3.0..3.0)).collect();
    (0..d)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1..=4 => {
                let v = pool[rng.gen_range(0..pool.len())];
                if rng.gen_bool(0.5) {
                    -v
                } else {
                    v
                }
            }
            _ => rng.gen_range(-3.0..3.0),
        })
        .collect()
}

/// Gaussian design with the given group sizes and a Gaussian response.
pub fn random_design(seed: u64, n: usize, sizes: &[usize]) -> GroupedDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = sizes
        .iter()
        .map(|&d| DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let y = DVector::from_fn(n, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
    GroupedDesign::new(groups, y).unwrap()
}
