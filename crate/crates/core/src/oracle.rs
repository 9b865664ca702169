//! The stochastic first-order oracle contract.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{RngStream, SampleHandle, SampleRng};
use crate::smoothing::CompositeModel;

pub type RealVector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("non-finite sampled gradient at batch index {index}")]
    NonFinite { index: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite input point")]
    NonFiniteInput,
    #[error("batch size must be >= 1")]
    EmptyBatch,
    #[error("{0} is not supported by this problem")]
    Unsupported(&'static str),
}

/// Structural constants of a problem instance. Everything except `n` is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub n: usize,
    /// strong-convexity modulus τ
    pub tau: Option<f64>,
    /// gradient Lipschitz constant L
    pub lipschitz_l: Option<f64>,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    /// quadratic-growth modulus α
    pub alpha_growth: Option<f64>,
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
}

impl ProblemMeta {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            tau: None,
            lipschitz_l: None,
            f_star: None,
            x_star: None,
            alpha_growth: None,
            nu1: None,
            nu2: None,
        }
    }

    /// κ = L/τ when both are known.
    pub fn kappa(&self) -> Option<f64> {
        match (self.lipschitz_l, self.tau) {
            (Some(l), Some(t)) => Some(l / t),
            _ => None,
        }
    }

    pub fn is_consistent(&self) -> bool {
        let pos = |v: Option<f64>| v.is_none_or(|v| v > 0.0 && v.is_finite());
        let nonneg = |v: Option<f64>| v.is_none_or(|v| v >= 0.0 && v.is_finite());
        let order = match (self.lipschitz_l, self.tau) {
            (Some(l), Some(t)) => l >= t,
            _ => true,
        };
        pos(self.tau)
            && pos(self.lipschitz_l)
            && pos(self.alpha_growth)
            && nonneg(self.nu1)
            && nonneg(self.nu2)
            && order
            && self.x_star.as_ref().is_none_or(|x| x.len() == self.n)
    }
}

/// A function `f(x) = E[F(x, ω)]` accessed through sampled gradients.
///
/// `eta` selects the smoothed sample function `F_η`; `eta = 0` means the
/// unsmoothed function (a subgradient where it is not differentiable).
pub trait StochasticProblem: Send + Sync {
    fn meta(&self) -> &ProblemMeta;

    fn dim(&self) -> usize {
        self.meta().n
    }

    /// Writes `∇F_η(x, ω)` into `out`, drawing ω from `rng`.
    fn sample_gradient(&self, x: &RealVector, eta: f64, rng: &mut SampleRng, out: &mut RealVector);

    /// Mean of the sampled gradients over the realizations in `handle`, summed in index order.
    fn batch_gradient(
        &self,
        x: &RealVector,
        eta: f64,
        handle: &SampleHandle,
    ) -> Result<RealVector, OracleError> {
        check_point(x, self.dim())?;
        if handle.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        let mut acc = RealVector::zeros(x.len());
        let mut g = RealVector::zeros(x.len());
        for (j, mut rng) in handle.iter().enumerate() {
            self.sample_gradient(x, eta, &mut rng, &mut g);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(OracleError::NonFinite { index: j as u64 });
            }
            acc += &g;
        }
        acc /= handle.len() as f64;
        Ok(acc)
    }

    /// Exact objective `f(x)` (unsmoothed), when computable.
    fn value(&self, _x: &RealVector) -> Option<f64> {
        None
    }

    /// Exact smoothed objective `f_η(x)`, when computable.
    fn smoothed_value(&self, x: &RealVector, eta: f64) -> Option<f64> {
        if eta == 0.0 {
            self.value(x)
        } else {
            None
        }
    }

    /// Exact gradient of `f_η`, when computable.
    fn exact_gradient(&self, _x: &RealVector, _eta: f64) -> Option<RealVector> {
        None
    }

    /// Deterministic composite model `f_N = g_N + h` of the sample average over `handle`,
    /// used by Moreau smoothing of the sampled objective.
    fn batch_model(&self, _handle: &SampleHandle) -> Option<Box<dyn CompositeModel + '_>> {
        None
    }
}

pub(crate) fn check_point(x: &RealVector, n: usize) -> Result<(), OracleError> {
    if x.len() != n {
        return Err(OracleError::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFiniteInput);
    }
    Ok(())
}

/// Draws `batch` realizations from `rng` and returns their mean gradient at `x`
/// together with a handle that replays the same realizations.
pub fn sample_average_gradient<P: StochasticProblem + ?Sized>(
    problem: &P,
    x: &RealVector,
    eta: f64,
    batch: u64,
    rng: &mut RngStream,
) -> Result<(RealVector, SampleHandle), OracleError> {
    if batch == 0 {
        return Err(OracleError::EmptyBatch);
    }
    check_point(x, problem.dim())?;
    let handle = rng.take(batch);
    let g = problem.batch_gradient(x, eta, &handle)?;
    Ok((g, handle))
}
