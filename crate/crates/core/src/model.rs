//! Grouped least-squares problem data: design, coefficients and penalties.
//!
//! The design is stored as one dense `n × d` matrix whose columns are the
//! per-group blocks `Φ_1 | Φ_2 | … | Φ_m` laid side by side. Coefficient
//! vectors use the same column order, so the flat view of a
//! [`GroupedVector`] is the concatenation of its blocks.

use std::ops::Range;

use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox;

/// Sizes of the coefficient groups, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::arg("at least one group is required"));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::arg(format!("group {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { sizes, offsets })
    }

    /// `m` groups of `size` entries each.
    pub fn uniform(m: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; m])
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, group: usize) -> usize {
        self.sizes[group]
    }

    /// Flat index range covered by `group`.
    pub fn range(&self, group: usize) -> Range<usize> {
        self.offsets[group]..self.offsets[group + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }
}

impl TryFrom<Vec<usize>> for GroupStructure {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<GroupStructure> for Vec<usize> {
    fn from(s: GroupStructure) -> Self {
        s.sizes
    }
}

/// Observation matrices for every group together with the response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDesign {
    matrix: DMatrix<f64>,
    response: DVector<f64>,
    structure: GroupStructure,
}

impl GroupedDesign {
    /// Builds a design from per-group matrices that must share a row count.
    pub fn new(groups: Vec<DMatrix<f64>>, response: DVector<f64>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::arg("at least one group matrix is required"));
        }
        let n = response.len();
        for (i, g) in groups.iter().enumerate() {
            if g.nrows() != n {
                return Err(Error::dims(format!(
                    "group {i} has {} rows but the response has {n}",
                    g.nrows()
                )));
            }
        }
        let structure = GroupStructure::new(groups.iter().map(|g| g.ncols()).collect())?;
        let mut matrix = DMatrix::zeros(n, structure.total());
        for (g, range) in groups.iter().zip(structure.ranges()) {
            matrix.columns_mut(range.start, range.len()).copy_from(g);
        }
        Self::from_parts(matrix, response, structure)
    }

    /// Builds a design from an already concatenated matrix.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        response: DVector<f64>,
        structure: GroupStructure,
    ) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::arg("design needs at least one observation"));
        }
        if matrix.nrows() != response.len() {
            return Err(Error::dims(format!(
                "matrix has {} rows but the response has {}",
                matrix.nrows(),
                response.len()
            )));
        }
        if matrix.ncols() != structure.total() {
            return Err(Error::dims(format!(
                "matrix has {} columns but the groups cover {}",
                matrix.ncols(),
                structure.total()
            )));
        }
        Ok(Self {
            matrix,
            response,
            structure,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn group_matrix(&self, group: usize) -> DMatrixView<'_, f64> {
        let r = self.structure.range(group);
        self.matrix.columns(r.start, r.len())
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// Same observation matrices with a different response.
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        Self::from_parts(self.matrix.clone(), response, self.structure.clone())
    }

    /// Restriction of the design to the given observation rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n_samples()) {
            return Err(Error::arg(format!("row {r} out of range")));
        }
        let matrix = self.matrix.select_rows(rows.iter());
        let response = self.response.select_rows(rows.iter());
        Self::from_parts(matrix, response, self.structure.clone())
    }

    pub(crate) fn check_vector(&self, x: &GroupedVector) -> Result<()> {
        if x.structure() != &self.structure {
            return Err(Error::dims(format!(
                "coefficient groups {:?} do not match design groups {:?}",
                x.structure().sizes(),
                self.structure.sizes()
            )));
        }
        Ok(())
    }
}

/// Coefficients partitioned into the groups of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedVector {
    values: DVector<f64>,
    structure: GroupStructure,
}

impl GroupedVector {
    pub fn zeros(structure: &GroupStructure) -> Self {
        Self {
            values: DVector::zeros(structure.total()),
            structure: structure.clone(),
        }
    }

    pub fn from_flat(structure: &GroupStructure, values: DVector<f64>) -> Result<Self> {
        if values.len() != structure.total() {
            return Err(Error::dims(format!(
                "flat vector has length {} but the groups cover {}",
                values.len(),
                structure.total()
            )));
        }
        Ok(Self {
            values,
            structure: structure.clone(),
        })
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let structure = GroupStructure::new(blocks.iter().map(Vec::len).collect())?;
        let values = DVector::from_iterator(structure.total(), blocks.into_iter().flatten());
        Ok(Self { values, structure })
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn flat(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_flat(self) -> DVector<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn block(&self, group: usize) -> &[f64] {
        &self.values.as_slice()[self.structure.range(group)]
    }

    pub fn block_mut(&mut self, group: usize) -> &mut [f64] {
        let r = self.structure.range(group);
        &mut self.values.as_mut_slice()[r]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.structure.ranges().map(|r| &self.values.as_slice()[r])
    }

    pub fn to_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks().map(<[f64]>::to_vec).collect()
    }

    pub fn num_groups(&self) -> usize {
        self.structure.num_groups()
    }

    /// Sum over groups of the Euclidean norm of the blockwise difference.
    pub fn group_distance(&self, other: &GroupedVector) -> f64 {
        self.blocks()
            .zip(other.blocks())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    Lasso,
    GroupLasso,
    SparseGroupLasso,
    GroupKmax,
}

/// How the per-group `k` selects the unpenalized entries of a k-max penalty.
///
/// With `KeepTopK` the `k` largest magnitudes are free and everything at or
/// below the `(k+1)`-th largest magnitude is penalized, so `k = d` leaves the
/// group unpenalized. `Literal` penalizes every entry at or below the `k`-th
/// largest magnitude, which keeps only the entries strictly above it; `k = 0`
/// penalizes the whole group in both conventions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KmaxConvention {
    #[default]
    KeepTopK,
    Literal,
}

/// Scaling of the least-squares term. Everything in this crate uses `Half`;
/// `HalfOverN` exists to translate regularization levels quoted for the
/// `1/(2n)` loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossScale {
    #[default]
    Half,
    HalfOverN,
}

impl LossScale {
    /// Regularization level giving the same minimizers under the `1/2` loss.
    pub fn to_half_scale(self, lambda: f64, n: usize) -> f64 {
        match self {
            LossScale::Half => lambda,
            LossScale::HalfOverN => lambda * n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// In-group l1 level, sparse group lasso only.
    #[serde(default)]
    pub mu: f64,
    /// Per-group number of free entries, group k-max only.
    #[serde(default)]
    pub k: Vec<usize>,
    /// Per-group weights of the Euclidean group norm; `None` means `sqrt(d_i)`.
    #[serde(default)]
    pub group_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub convention: KmaxConvention,
}

impl PenaltySpec {
    fn base(kind: PenaltyKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            mu: 0.0,
            k: Vec::new(),
            group_weights: None,
            convention: KmaxConvention::default(),
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self::base(PenaltyKind::Lasso, lambda)
    }

    pub fn group_lasso(lambda: f64) -> Self {
        Self::base(PenaltyKind::GroupLasso, lambda)
    }

    pub fn sparse_group_lasso(lambda: f64, mu: f64) -> Self {
        Self {
            mu,
            ..Self::base(PenaltyKind::SparseGroupLasso, lambda)
        }
    }

    pub fn group_kmax(lambda: f64, k: Vec<usize>) -> Self {
        Self {
            k,
            ..Self::base(PenaltyKind::GroupKmax, lambda)
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Self {
        Self {
            group_weights: Some(weights),
            ..self
        }
    }

    pub fn with_convention(self, convention: KmaxConvention) -> Self {
        Self { convention, ..self }
    }

    pub fn validate(&self, structure: &GroupStructure) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPenalty(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be finite and nonnegative, got {}", self.mu));
        }
        if self.mu != 0.0 && self.kind != PenaltyKind::SparseGroupLasso {
            return bad("mu is only used by the sparse group lasso".into());
        }
        match self.kind {
            PenaltyKind::GroupKmax => {
                let m = structure.num_groups();
                if self.k.len() != m {
                    return bad(format!("expected {m} values of k, got {}", self.k.len()));
                }
                for (i, (&k, &d)) in self.k.iter().zip(structure.sizes()).enumerate() {
                    if k > d {
                        return bad(format!("k = {k} exceeds the size {d} of group {i}"));
                    }
                }
            }
            _ if !self.k.is_empty() => {
                return bad("k is only used by the group k-max penalty".into());
            }
            _ => {}
        }
        if let Some(w) = &self.group_weights {
            if w.len() != structure.num_groups() {
                return bad(format!(
                    "expected {} group weights, got {}",
                    structure.num_groups(),
                    w.len()
                ));
            }
            if w.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                return bad("group weights must be positive".into());
            }
        }
        Ok(())
    }

    /// Group-norm weights, defaulting to `sqrt(d_i)`.
    pub fn weights(&self, structure: &GroupStructure) -> Vec<f64> {
        match &self.group_weights {
            Some(w) => w.clone(),
            None => structure.sizes().iter().map(|&d| (d as f64).sqrt()).collect(),
        }
    }

    /// Value of the regularization term (including `lambda` and `mu`).
    pub fn value(&self, x: &GroupedVector) -> Result<f64> {
        self.validate(x.structure())?;
        let l1 = |b: &[f64]| b.iter().map(|v| v.abs()).sum::<f64>();
        let l2 = |b: &[f64]| b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let total = match self.kind {
            PenaltyKind::Lasso => self.lambda * x.blocks().map(l1).sum::<f64>(),
            PenaltyKind::GroupLasso => {
                let w = self.weights(x.structure());
                self.lambda * x.blocks().zip(&w).map(|(b, w)| w * l2(b)).sum::<f64>()
            }
            PenaltyKind::SparseGroupLasso => {
                let w = self.weights(x.structure());
                self.lambda * x.blocks().zip(&w).map(|(b, w)| w * l2(b)).sum::<f64>()
                    + self.mu * x.blocks().map(l1).sum::<f64>()
            }
            PenaltyKind::GroupKmax => {
                let mut sum = 0.0;
                for (b, &k) in x.blocks().zip(&self.k) {
                    sum += prox::kmax_penalty_with(b, k, self.convention)?;
                }
                self.lambda * sum
            }
        };
        Ok(total)
    }
}

/// `Σ_i Φ_i x_i`.
pub fn predict(design: &GroupedDesign, x: &GroupedVector) -> Result<DVector<f64>> {
    design.check_vector(x)?;
    Ok(design.matrix() * x.flat())
}

/// `y − Σ_i Φ_i x_i`.
pub fn residual(design: &GroupedDesign, x: &GroupedVector) -> Result<DVector<f64>> {
    Ok(design.response() - predict(design, x)?)
}

/// Half squared residual norm plus the penalty term.
pub fn objective(design: &GroupedDesign, x: &GroupedVector, penalty: &PenaltySpec) -> Result<f64> {
    let r = residual(design, x)?;
    Ok(0.5 * r.norm_squared() + penalty.value(x)?)
}
