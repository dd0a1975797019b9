use crate::error::{Error, Result};
use crate::model::GroupedVector;

/// Magnitude above which a coefficient counts as nonzero.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-6;

fn check_same(est: &GroupedVector, truth: &GroupedVector) -> Result<()> {
    if est.structure() != truth.structure() {
        return Err(Error::DimensionMismatch(
            "estimate and truth have different group structures".into(),
        ));
    }
    Ok(())
}

/// Relative coefficient error `100·‖est − truth‖₂ / ‖truth‖₂`.
pub fn rmse_pct(est: &GroupedVector, truth: &GroupedVector) -> Result<f64> {
    check_same(est, truth)?;
    let norm = truth.flat().norm();
    if norm == 0.0 {
        return Err(Error::arg("truth has zero norm"));
    }
    Ok(100.0 * (est.flat() - truth.flat()).norm() / norm)
}

/// Percentage of the true support that the estimate recovers above `tol`.
pub fn cpr_pct(est: &GroupedVector, truth: &GroupedVector, tol: f64) -> Result<f64> {
    check_same(est, truth)?;
    let mut support = 0usize;
    let mut hit = 0usize;
    for (e, t) in est.as_slice().iter().zip(truth.as_slice()) {
        if t.abs() > 0.0 {
            support += 1;
            if e.abs() > tol {
                hit += 1;
            }
        }
    }
    if support == 0 {
        return Err(Error::arg("truth has no nonzero entries"));
    }
    Ok(100.0 * hit as f64 / support as f64)
}

/// Entries above `tol` where the truth is exactly zero.
pub fn false_nonzeros(est: &GroupedVector, truth: &GroupedVector, tol: f64) -> Result<usize> {
    check_same(est, truth)?;
    Ok(est
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(e, t)| **t == 0.0 && e.abs() > tol)
        .count())
}

/// `(nnz_overall, nnz_groups)`: entries above `tol` and groups holding any.
pub fn sparsity_stats(x: &GroupedVector, tol: f64) -> (usize, usize) {
    let mut overall = 0;
    let mut groups = 0;
    for block in x.blocks() {
        let c = block.iter().filter(|v| v.abs() > tol).count();
        overall += c;
        groups += usize::from(c > 0);
    }
    (overall, groups)
}
