//! Variable sample-size SQN schemes and baselines.
//!
//! All schemes share one loop: draw `N_k` realizations, form a (possibly
//! smoothed and regularized) sample-average gradient, precondition it with the
//! L-BFGS memory and step. Curvature pairs are formed at odd `k` on the batch
//! drawn at `k − 1`.

mod config;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hessian::{HessianError, LbfgsMemory};
use crate::oracle::{OracleError, RealVector};
use crate::regularization::RegularizationError;
use crate::rng::SampleHandle;
use crate::schedule::ScheduleError;
use crate::smoothing::SmoothingError;

pub use config::{LogPolicy, SolverConfig};
pub use run::{run, run_baseline, run_rsvs_sqn, run_rvs_sqn, run_svs_sqn, run_vs_sqn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "VS_SQN")]
    VsSqn,
    #[serde(rename = "SVS_SQN_MOREAU")]
    SvsSqnMoreau,
    #[serde(rename = "SVS_SQN_DIMINISHING")]
    SvsSqnDiminishing,
    #[serde(rename = "RVS_SQN")]
    RvsSqn,
    #[serde(rename = "RSVS_SQN")]
    RsvsSqn,
    #[serde(rename = "SGD")]
    Sgd,
    #[serde(rename = "SQN_UNIT")]
    SqnUnit,
    #[serde(rename = "APG_BASELINE")]
    ApgBaseline,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::VsSqn,
        Scheme::SvsSqnMoreau,
        Scheme::SvsSqnDiminishing,
        Scheme::RvsSqn,
        Scheme::RsvsSqn,
        Scheme::Sgd,
        Scheme::SqnUnit,
        Scheme::ApgBaseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::VsSqn => "VS_SQN",
            Scheme::SvsSqnMoreau => "SVS_SQN_MOREAU",
            Scheme::SvsSqnDiminishing => "SVS_SQN_DIMINISHING",
            Scheme::RvsSqn => "RVS_SQN",
            Scheme::RsvsSqn => "RSVS_SQN",
            Scheme::Sgd => "SGD",
            Scheme::SqnUnit => "SQN_UNIT",
            Scheme::ApgBaseline => "APG_BASELINE",
        }
    }

    /// First iteration index; schemes whose schedules are powers of `k` start at 1.
    pub fn first_k(&self) -> u64 {
        match self {
            Scheme::RvsSqn | Scheme::Sgd | Scheme::SqnUnit => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_uppercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == t)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("scheme {scheme} needs `{name}` (from the problem or the config) unless the step is overridden")]
    MissingConstant { scheme: Scheme, name: &'static str },
    #[error("smoothing parameter {eta} exceeds the cap min{{2/L, (4(n+1)^2/tau^2)^(1/3)}} = {cap}")]
    EtaCap { eta: f64, cap: f64 },
    #[error("base batch N0 = {n0} must exceed C/(lambda_lo*mu*gamma) = {bound}")]
    BatchBound { n0: f64, bound: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Hessian(#[from] HessianError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    #[error(transparent)]
    Regularization(#[from] RegularizationError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl SolverError {
    pub(crate) fn config(field: &'static str, msg: impl Into<String>) -> Self {
        SolverError::Config {
            field,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Horizon,
    ZeroStep,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Budget => "budget",
            Termination::Horizon => "horizon",
            Termination::ZeroStep => "zero-step",
        })
    }
}

/// One logged iterate. Row `k` describes `x_k` and the work spent to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: u64,
    pub samples_cum: u64,
    pub grad_evals_cum: u64,
    pub fval: Option<f64>,
    pub gap: Option<f64>,
    pub grad_norm: Option<f64>,
    pub step_norm: f64,
    pub wall_ms: f64,
    /// parameters of the step that produced `x_k` (absent on the initial row)
    pub batch: Option<u64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
}

/// Everything needed to recompute one update from outside the solver.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub k: u64,
    pub x: RealVector,
    pub gamma: f64,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub handle: SampleHandle,
    pub memory: LbfgsMemory,
    pub x_next: RealVector,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub scheme: Scheme,
    pub records: Vec<IterateRecord>,
    pub x_final: RealVector,
    /// weighted average `x̄_K` (rsVS-SQN only)
    pub x_averaged: Option<RealVector>,
    /// uniform average of iterates (SGD with averaging only)
    pub x_polyak: Option<RealVector>,
    pub termination: Termination,
    pub iterations: u64,
    pub samples: u64,
    pub grad_evals: u64,
    pub pairs_formed: u64,
    /// theoretical step at the first iteration, when the constants allow it
    pub theoretical_step: Option<f64>,
    /// step used at the first iteration
    pub step0: f64,
    pub nu2_used: f64,
    /// largest inner prox residual (Moreau scheme)
    pub max_prox_residual: f64,
    pub trace: Vec<TraceEntry>,
}

impl RunResult {
    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("a run logs at least its initial point")
    }

    /// The point a scheme reports: `x̄_K` for rsVS-SQN, the Polyak average for averaged SGD, else `x_K`.
    pub fn output_point(&self) -> &RealVector {
        self.x_averaged
            .as_ref()
            .or(self.x_polyak.as_ref())
            .unwrap_or(&self.x_final)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AverageError {
    #[error("weight {index} is not positive: {weight}")]
    Weight { index: usize, weight: f64 },
    #[error("{0} points but {1} weights")]
    Length(usize, usize),
    #[error("nothing to average")]
    Empty,
}

/// `Σ w_i x_i / Σ w_i`.
pub fn weighted_average(xs: &[RealVector], weights: &[f64]) -> Result<RealVector, AverageError> {
    if xs.len() != weights.len() {
        return Err(AverageError::Length(xs.len(), weights.len()));
    }
    if xs.is_empty() {
        return Err(AverageError::Empty);
    }
    let mut acc = RealVector::zeros(xs[0].len());
    let mut total = 0.0;
    for (i, (x, w)) in xs.iter().zip(weights).enumerate() {
        if !(*w > 0.0) {
            return Err(AverageError::Weight { index: i, weight: *w });
        }
        acc.axpy(*w, x, 1.0);
        total += w;
    }
    Ok(acc / total)
}
