//! Logistic regression `(1/N)Σ ln(1+exp(−v_i u_iᵀx)) + (μ/2)‖x‖² + λ·r(x)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::oracle::{check_point, OracleError, ProblemMeta, RealVector, StochasticProblem};
use crate::problems::dataset::CsrMatrix;
use crate::rng::{RngStream, SampleHandle, SampleRng};
use crate::smoothing::huber_scalar;

#[derive(Debug, Error, PartialEq)]
pub enum LogisticError {
    #[error("labels must be -1 or +1 (row {0})")]
    Label(usize),
    #[error("{0} labels for {1} rows")]
    Rows(usize, usize),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("coefficients must be >= 0")]
    Coefficient,
}

/// The ℓ1 term and how it is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L1Term {
    None,
    /// `‖x‖₁`, Huber-smoothed with the requested η (subgradient at η = 0)
    Huber,
    /// pseudo-Huber `Σ √(x_i² + λ₂)`
    Sqrt { lambda2: f64 },
}

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    data: CsrMatrix,
    labels: Vec<f64>,
    mu_l2: f64,
    lambda_l1: f64,
    l1: L1Term,
    meta: ProblemMeta,
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1/(1 + e^{−t})` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    pub fn new(
        data: CsrMatrix,
        labels: Vec<f64>,
        mu_l2: f64,
        lambda_l1: f64,
        l1: L1Term,
    ) -> Result<Self, LogisticError> {
        if labels.len() != data.nrows {
            return Err(LogisticError::Rows(labels.len(), data.nrows));
        }
        if let Some(i) = labels.iter().position(|v| *v != 1.0 && *v != -1.0) {
            return Err(LogisticError::Label(i));
        }
        if data.values.iter().any(|v| !v.is_finite()) {
            return Err(LogisticError::NonFinite);
        }
        if !(mu_l2 >= 0.0 && lambda_l1 >= 0.0) {
            return Err(LogisticError::Coefficient);
        }
        if let L1Term::Sqrt { lambda2 } = l1 {
            if !(lambda2 > 0.0) {
                return Err(LogisticError::Coefficient);
            }
        }
        let n = data.ncols;
        let max_row = (0..data.nrows)
            .map(|i| data.row_norm_squared(i))
            .fold(0.0, f64::max);
        let mut meta = ProblemMeta::new(n);
        let curv = match l1 {
            L1Term::Sqrt { lambda2 } => lambda_l1 / lambda2.sqrt(),
            _ => 0.0,
        };
        meta.lipschitz_l = Some(max_row / 4.0 + mu_l2 + curv).filter(|l| *l > 0.0);
        meta.tau = (mu_l2 > 0.0).then_some(mu_l2);
        meta.alpha_growth = meta.tau;
        Ok(Self {
            data,
            labels,
            mu_l2,
            lambda_l1,
            l1,
            meta,
        })
    }

    pub fn data(&self) -> &CsrMatrix {
        &self.data
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn samples(&self) -> usize {
        self.data.nrows
    }

    fn reg_grad(&self, x: &RealVector, eta: f64, out: &mut RealVector) {
        if self.mu_l2 > 0.0 {
            out.axpy(self.mu_l2, x, 1.0);
        }
        if self.lambda_l1 == 0.0 {
            return;
        }
        let lam = self.lambda_l1;
        match self.l1 {
            L1Term::None => {}
            L1Term::Huber => {
                for i in 0..x.len() {
                    out[i] += lam
                        * if eta > 0.0 {
                            huber_scalar(x[i], eta).1
                        } else if x[i] == 0.0 {
                            0.0
                        } else {
                            x[i].signum()
                        };
                }
            }
            L1Term::Sqrt { lambda2 } => {
                for i in 0..x.len() {
                    out[i] += lam * x[i] / (x[i] * x[i] + lambda2).sqrt();
                }
            }
        }
    }

    fn reg_value(&self, x: &RealVector, eta: f64) -> f64 {
        let mut v = 0.5 * self.mu_l2 * x.norm_squared();
        let lam = self.lambda_l1;
        v += match self.l1 {
            L1Term::None => 0.0,
            L1Term::Huber if eta > 0.0 => lam * x.iter().map(|t| huber_scalar(*t, eta).0).sum::<f64>(),
            L1Term::Huber => lam * x.lp_norm(1),
            L1Term::Sqrt { lambda2 } => lam * x.iter().map(|t| (t * t + lambda2).sqrt()).sum::<f64>(),
        };
        v
    }

    /// Loss of row `i` and the scalar `dℓ/d(u_iᵀx)`.
    fn row_loss(&self, i: usize, x: &RealVector) -> (f64, f64) {
        let v = self.labels[i];
        let m = v * self.data.row_dot(i, x);
        (softplus(-m), -v * sigmoid(-m))
    }
}

impl StochasticProblem for LogisticProblem {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn sample_gradient(&self, x: &RealVector, eta: f64, rng: &mut SampleRng, out: &mut RealVector) {
        let i = rng.random_range(0..self.data.nrows);
        out.fill(0.0);
        let (_, d) = self.row_loss(i, x);
        self.data.row_axpy(i, d, out);
        self.reg_grad(x, eta, out);
    }

    fn batch_gradient(&self, x: &RealVector, eta: f64, handle: &SampleHandle) -> Result<RealVector, OracleError> {
        check_point(x, self.dim())?;
        if handle.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        let mut g = RealVector::zeros(x.len());
        for (j, mut rng) in handle.iter().enumerate() {
            let i = rng.random_range(0..self.data.nrows);
            let (_, d) = self.row_loss(i, x);
            if !d.is_finite() {
                return Err(OracleError::NonFinite { index: j as u64 });
            }
            self.data.row_axpy(i, d, &mut g);
        }
        g /= handle.len() as f64;
        self.reg_grad(x, eta, &mut g);
        Ok(g)
    }

    fn value(&self, x: &RealVector) -> Option<f64> {
        self.smoothed_value(x, 0.0)
    }

    fn smoothed_value(&self, x: &RealVector, eta: f64) -> Option<f64> {
        let loss: f64 = (0..self.data.nrows).map(|i| self.row_loss(i, x).0).sum();
        Some(loss / self.data.nrows as f64 + self.reg_value(x, eta))
    }

    fn exact_gradient(&self, x: &RealVector, eta: f64) -> Option<RealVector> {
        let mut g = RealVector::zeros(x.len());
        for i in 0..self.data.nrows {
            let (_, d) = self.row_loss(i, x);
            self.data.row_axpy(i, d, &mut g);
        }
        g /= self.data.nrows as f64;
        self.reg_grad(x, eta, &mut g);
        Some(g)
    }
}

/// Synthetic sparse data with a planted sparse weight vector.
///
/// Features are nonzero with probability `density` and standard normal;
/// `support_frac` of the weights are nonzero. Labels follow the logistic model.
pub fn synthetic_sparse_logistic(
    samples: usize,
    n: usize,
    density: f64,
    support_frac: f64,
    rng: &mut RngStream,
) -> (CsrMatrix, Vec<f64>, RealVector) {
    let mut r = rng.next_rng();
    let k = ((n as f64 * support_frac).round() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = r.random_range(i..n);
        idx.swap(i, j);
    }
    let mut w = RealVector::zeros(n);
    for &i in &idx[..k] {
        let s: f64 = StandardNormal.sample(&mut r);
        w[i] = 2.0 * s;
    }
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut row = Vec::new();
        for c in 0..n {
            if r.random::<f64>() < density {
                row.push((c, StandardNormal.sample(&mut r)));
            }
        }
        let m: f64 = row.iter().map(|(c, v): &(usize, f64)| v * w[*c]).sum();
        let p = sigmoid(m);
        labels.push(if r.random::<f64>() < p { 1.0 } else { -1.0 });
        rows.push(row);
    }
    (CsrMatrix::from_rows(n, rows), labels, w)
}
