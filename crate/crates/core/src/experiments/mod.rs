//! Data generation, ingestion, metrics and model selection for benchmarks.

pub mod bench;
pub mod cv;
pub mod dataset;
pub mod metrics;
pub mod synthetic;

pub use bench::{BenchConfig, Method, MethodRecord};
pub use cv::{cross_validate, init_k_from_lasso, k_from_support, lambda_max, relative_grid, CvCell, CvOutcome, FoldPlan};
pub use dataset::{load_dataset, Dataset, GroupConfig, GroupSpec, Table};
pub use metrics::{cpr_pct, false_nonzeros, rmse_pct, sparsity_stats, DEFAULT_SUPPORT_TOL};
pub use synthetic::{gen_synthetic, SyntheticConfig};
