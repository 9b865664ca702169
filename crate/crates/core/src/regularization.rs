//! Iterative Tikhonov regularization and the μ/η alternation rule.

use thiserror::Error;

use crate::oracle::RealVector;
use crate::schedule::{ScalarSchedule, ScheduleError};

#[derive(Debug, Error, PartialEq)]
pub enum RegularizationError {
    #[error("regularization parameter must be > 0, got {0}")]
    Mu(f64),
    #[error("{name} must strictly decrease at even k = {k}: previous {prev}, schedule gives {next}")]
    NotDecreasing {
        name: &'static str,
        k: u64,
        prev: f64,
        next: f64,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// `f_μ(x) = f(x) + (μ/2)‖x − x₀‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedView {
    pub mu: f64,
    pub center: RealVector,
}

impl RegularizedView {
    pub fn new(mu: f64, center: RealVector) -> Result<Self, RegularizationError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(RegularizationError::Mu(mu));
        }
        Ok(Self { mu, center })
    }

    /// Returns `(f(x) + (μ/2)‖x−x₀‖²`, when the base value is given, and `g + μ(x − x₀))`.
    pub fn value_grad(
        &self,
        x: &RealVector,
        sampled_grad: &RealVector,
        base_value: Option<f64>,
    ) -> (Option<f64>, RealVector) {
        let d = x - &self.center;
        let value = base_value.map(|f| f + 0.5 * self.mu * d.norm_squared());
        let mut g = sampled_grad.clone();
        g.axpy(self.mu, &d, 1.0);
        (value, g)
    }
}

/// Convenience wrapper for [`RegularizedView::value_grad`].
pub fn reg_value_grad(
    view: &RegularizedView,
    x: &RealVector,
    sampled_grad: &RealVector,
    base_value: Option<f64>,
) -> (Option<f64>, RealVector) {
    view.value_grad(x, sampled_grad, base_value)
}

/// Parameters frozen into curvature pairs: held at odd k, decreased at even k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternationState {
    pub mu_current: f64,
    pub eta_current: f64,
    pub last_update_k: u64,
}

impl AlternationState {
    pub fn new(mu: f64, eta: f64, k: u64) -> Self {
        Self {
            mu_current: mu,
            eta_current: eta,
            last_update_k: k,
        }
    }

    /// Starts from the schedule values at `k0`. A missing schedule leaves the parameter at 0.
    pub fn from_schedules(
        k0: u64,
        mu: Option<&ScalarSchedule>,
        eta: Option<&ScalarSchedule>,
    ) -> Result<Self, RegularizationError> {
        let m = mu.map(|s| s.eval(k0)).transpose()?.unwrap_or(0.0);
        let e = eta.map(|s| s.eval(k0)).transpose()?.unwrap_or(0.0);
        Ok(Self::new(m, e, k0))
    }
}

/// Advances the alternation to iteration `k`.
///
/// Odd `k` keeps the state; even `k` takes the schedule values, which must be
/// strictly smaller than the current ones. Pass `None` for a parameter that is
/// not in use.
pub fn alternation_step(
    state: AlternationState,
    k: u64,
    mu_sched: Option<&ScalarSchedule>,
    eta_sched: Option<&ScalarSchedule>,
) -> Result<AlternationState, RegularizationError> {
    if k % 2 == 1 {
        return Ok(state);
    }
    let mut next = state;
    if let Some(s) = mu_sched {
        let v = s.eval(k)?;
        if !(v < state.mu_current) {
            return Err(RegularizationError::NotDecreasing {
                name: "mu",
                k,
                prev: state.mu_current,
                next: v,
            });
        }
        next.mu_current = v;
    }
    if let Some(s) = eta_sched {
        let v = s.eval(k)?;
        if !(v < state.eta_current) {
            return Err(RegularizationError::NotDecreasing {
                name: "eta",
                k,
                prev: state.eta_current,
                next: v,
            });
        }
        next.eta_current = v;
    }
    next.last_update_k = k;
    Ok(next)
}
