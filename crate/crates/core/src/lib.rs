//! Sparse group k-max regularized least squares.
//!
//! The crate solves
//!
//! ```text
//! min_x  ½‖y − Σ_i Φ_i x_i‖₂² + λ Σ_i P(x_i)
//! ```
//!
//! where `P` is the lasso, group lasso, sparse group lasso or sparse group
//! k-max penalty, all through the same iterative soft thresholding loop.
//! The k-max penalty leaves the `k_i` largest magnitudes of each group free
//! and charges the l1 norm of the rest.

mod clock;
pub mod error;
pub mod experiments;
pub mod model;
pub mod optimality;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    objective, predict, residual, GroupStructure, GroupedDesign, GroupedVector, KmaxConvention,
    LossScale, PenaltyKind, PenaltySpec,
};
pub use optimality::{check_theorem2, perturbation_oracle, stationary_residual, OptimalityReport};
pub use solver::{
    lipschitz_estimate, solve, solve_path, SolveOptions, SolveResult, Solver, StepMode,
    Termination,
};
