//! Variable sample-size stochastic quasi-Newton methods.
//!
//! The crate provides the four schemes (VS-SQN, sVS-SQN, rVS-SQN, rsVS-SQN)
//! built on a regularized and smoothed limited-memory BFGS approximation, a
//! smoothing toolkit, and a set of test problems.

pub mod hessian;
pub mod oracle;
pub mod problems;
pub mod regularization;
pub mod rng;
pub mod schedule;
pub mod smoothing;
pub mod solvers;

pub use oracle::{ProblemMeta, RealVector, StochasticProblem};
pub use rng::{RngStream, SampleHandle};
