//! Batch-size and scalar parameter schedules.
//!
//! Schedules are evaluated lazily, one iteration at a time, so horizon-free
//! schemes can run to an arbitrary budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("base batch size must be >= 1, got {0}")]
    BaseSize(f64),
    #[error("geometric rate must lie in (0, 1), got {0}")]
    Rate(f64),
    #[error("polynomial exponent must be > 0, got {0}")]
    Exponent(f64),
    #[error("scalar schedule base must be finite and > 0, got {0}")]
    Base(f64),
    #[error("scalar schedule is undefined at k = {k} (k + offset = 0 with a negative exponent)")]
    Undefined { k: u64 },
    #[error("horizon must be >= 1")]
    Horizon,
}

/// Rounds up, treating values within 1e-9 (relative) of an integer as that integer,
/// so that e.g. `0.5^-3` evaluates to exactly 8 regardless of `powf` rounding.
fn ceil_tolerant(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// Sample-size sequence `N_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchSchedule {
    /// `⌈N0 · rate^-(k + offset)⌉`
    Geometric { n0: f64, rate: f64, offset: u64 },
    /// `⌈N0 · (k + offset)^exponent⌉`
    Polynomial { n0: f64, exponent: f64, offset: u64 },
    /// `⌈N0⌉`
    Constant { n0: f64 },
}

impl BatchSchedule {
    pub fn geometric(n0: f64, rate: f64) -> Result<Self, ScheduleError> {
        Self::Geometric { n0, rate, offset: 0 }.validated()
    }

    pub fn polynomial(n0: f64, exponent: f64, offset: u64) -> Result<Self, ScheduleError> {
        Self::Polynomial {
            n0,
            exponent,
            offset,
        }
        .validated()
    }

    pub fn constant(n0: f64) -> Result<Self, ScheduleError> {
        Self::Constant { n0 }.validated()
    }

    pub fn validated(self) -> Result<Self, ScheduleError> {
        let n0 = self.n0();
        if !(n0 >= 1.0 && n0.is_finite()) {
            return Err(ScheduleError::BaseSize(n0));
        }
        match self {
            Self::Geometric { rate, .. } if !(rate > 0.0 && rate < 1.0) => {
                Err(ScheduleError::Rate(rate))
            }
            Self::Polynomial { exponent, .. } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(ScheduleError::Exponent(exponent))
            }
            _ => Ok(self),
        }
    }

    pub fn n0(&self) -> f64 {
        match *self {
            Self::Geometric { n0, .. } | Self::Polynomial { n0, .. } | Self::Constant { n0 } => n0,
        }
    }

    /// Same schedule with a different base size.
    pub fn with_n0(self, n0: f64) -> Result<Self, ScheduleError> {
        match self {
            Self::Geometric { rate, offset, .. } => Self::Geometric { n0, rate, offset },
            Self::Polynomial {
                exponent, offset, ..
            } => Self::Polynomial {
                n0,
                exponent,
                offset,
            },
            Self::Constant { .. } => Self::Constant { n0 },
        }
        .validated()
    }

    /// `N_k`, always at least 1.
    pub fn eval(&self, k: u64) -> u64 {
        let raw = match *self {
            Self::Geometric { n0, rate, offset } => n0 * rate.powf(-((k + offset) as f64)),
            Self::Polynomial {
                n0,
                exponent,
                offset,
            } => n0 * ((k + offset) as f64).powf(exponent),
            Self::Constant { n0 } => n0,
        };
        let v = ceil_tolerant(raw);
        if v >= u64::MAX as f64 {
            u64::MAX
        } else {
            (v as u64).max(1)
        }
    }
}

/// Scalar parameter sequence (steplength, regularization, smoothing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarSchedule {
    Constant { value: f64 },
    /// `base · (k + offset)^exponent`
    Power { base: f64, exponent: f64, offset: u64 },
    /// `base · horizon^exponent`, constant along the run.
    HorizonConstant { base: f64, exponent: f64, horizon: u64 },
}

impl ScalarSchedule {
    pub fn constant(value: f64) -> Result<Self, ScheduleError> {
        Self::Constant { value }.validated()
    }

    pub fn power(base: f64, exponent: f64, offset: u64) -> Result<Self, ScheduleError> {
        Self::Power {
            base,
            exponent,
            offset,
        }
        .validated()
    }

    pub fn horizon_constant(base: f64, exponent: f64, horizon: u64) -> Result<Self, ScheduleError> {
        Self::HorizonConstant {
            base,
            exponent,
            horizon,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, ScheduleError> {
        let base = match self {
            Self::Constant { value } => value,
            Self::Power { base, .. } => base,
            Self::HorizonConstant { base, horizon, .. } => {
                if horizon == 0 {
                    return Err(ScheduleError::Horizon);
                }
                base
            }
        };
        if !(base > 0.0 && base.is_finite()) {
            return Err(ScheduleError::Base(base));
        }
        Ok(self)
    }

    pub fn eval(&self, k: u64) -> Result<f64, ScheduleError> {
        match *self {
            Self::Constant { value } => Ok(value),
            Self::Power {
                base,
                exponent,
                offset,
            } => {
                let t = (k + offset) as f64;
                if t == 0.0 && exponent < 0.0 {
                    return Err(ScheduleError::Undefined { k });
                }
                Ok(base * t.powf(exponent))
            }
            Self::HorizonConstant {
                base,
                exponent,
                horizon,
            } => Ok(base * (horizon as f64).powf(exponent)),
        }
    }

    /// Whether the sequence is non-increasing in `k`.
    pub fn is_non_increasing(&self) -> bool {
        match *self {
            Self::Constant { .. } | Self::HorizonConstant { .. } => true,
            Self::Power { exponent, .. } => exponent <= 0.0,
        }
    }
}
