//! Exact Gaussian-process regression with additive kernels.
//!
//! The model is assembled from per-column kernel terms (`kernel`), scored by
//! exact log marginal likelihood with analytic gradients (`likelihood`),
//! fitted by multi-restart bounded quasi-Newton optimization (`optimizer`),
//! and exposed through a fit/predict interface that handles input and target
//! standardization (`model`).

pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod optimizer;

use thiserror::Error;

pub use kernel::{KernelComponent, KernelSpec, KernelTerm};
pub use likelihood::{log_marginal_likelihood, log_marginal_likelihood_with_grad};
pub use model::{FitConfig, FitDiagnostics, GpModel, PredictiveDistribution, Standardization};

#[derive(Debug, Error)]
pub enum GpError {
    #[error("hyperparameter {name} must be positive, got {value}")]
    NonPositiveParam { name: String, value: f64 },
    #[error("kernel input has {got} columns but the kernel references column {column}")]
    ColumnOutOfRange { column: usize, got: usize },
    #[error("training inputs have {rows} rows but targets have {targets}")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training data contains a non-finite value")]
    NonFiniteData,
    #[error(
        "covariance matrix is not positive definite even with jitter up to {max_jitter:.3e}"
    )]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("all {attempts} optimizer restarts failed; last error: {last}")]
    AllRestartsFailed { attempts: usize, last: String },
    #[error("objective became non-finite at {context}")]
    NonFiniteObjective { context: String },
}
