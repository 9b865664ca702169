//! Test problems.

pub mod dataset;
pub mod isotonic;
pub mod lewis_overton;
pub mod logistic;
pub mod quadratic;
pub mod reference;

pub use dataset::{load_sparse_dataset, write_sparse_dataset, CsrMatrix, DatasetError};
pub use isotonic::{constraint_violation, isotonic_make, pava_project, IsotonicLasso};
pub use lewis_overton::{lewis_overton_oracle, LewisOverton};
pub use logistic::{synthetic_sparse_logistic, L1Term, LogisticProblem};
pub use quadratic::{quad_make, Convexity, QuadraticEnsemble};
