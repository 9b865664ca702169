//! Experiment harness for the vssqn solvers: configuration, CSV logs,
//! preset experiments and verification oracles.

pub mod config;
pub mod csvlog;
pub mod experiment;
pub mod oracles;
pub mod presets;

use thiserror::Error;

pub use config::{ExperimentConfig, ProblemSpec};
pub use csvlog::{CsvLog, CsvRow};
pub use experiment::{build_problem, run_all, run_cell, CellOutcome};
pub use oracles::{fd_check, fit_points, rate_fit, sparsity_count, FdReport, RateFit, RateModel};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Dataset(#[from] vssqn::problems::DatasetError),
    #[error(transparent)]
    Logistic(#[from] vssqn::problems::logistic::LogisticError),
    #[error(transparent)]
    Solver(#[from] vssqn::solvers::SolverError),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// Exit code for the CLI: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Solver(vssqn::solvers::SolverError::Config { .. })
            | HarnessError::Solver(vssqn::solvers::SolverError::MissingConstant { .. })
            | HarnessError::Solver(vssqn::solvers::SolverError::EtaCap { .. })
            | HarnessError::Solver(vssqn::solvers::SolverError::BatchBound { .. }) => 2,
            _ => 1,
        }
    }
}
