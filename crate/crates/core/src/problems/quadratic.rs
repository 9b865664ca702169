//! Stochastic quadratics `F(x, ω) = ½xᵀQ(ω)x + c(ω)ᵀx` with controlled spectrum.
//!
//! `Q(ω) = V diag(λ∘ξ(ω)) Vᵀ` with `ξ_i ~ U[1−r, 1+r]` and `c(ω) = −Q(ω)x⁰ + e(ω)`,
//! where `e(ω) = (ν₂/√n) z`, `z ~ N(0, I)`. An optional `λ‖x‖₁` term is
//! Huber-smoothed with the requested η.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::oracle::{check_point, OracleError, ProblemMeta, RealVector, StochasticProblem};
use crate::problems::reference::fista;
use crate::rng::{RngStream, SampleHandle, SampleRng};
use crate::smoothing::{huber_scalar, prox_soft_threshold, CompositeModel};

const FORMAT: &str = "vssqn-quadratic";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    /// spectrum in `[1, κ]`
    Sc,
    /// spectrum in `[0, κ]`
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QuadraticFile {
    format: String,
    version: u32,
    eigs: Vec<f64>,
    /// row-major n×n
    frame: Vec<f64>,
    x0_true: Vec<f64>,
    spread: f64,
    nu2: f64,
    lambda_l1: f64,
}

#[derive(Debug, Clone)]
pub struct QuadraticEnsemble {
    eigs: Vec<f64>,
    frame: DMatrix<f64>,
    x0_true: RealVector,
    spread: f64,
    nu2: f64,
    lambda_l1: f64,
    qbar: DMatrix<f64>,
    meta: ProblemMeta,
}

/// Random ensemble with `E[Q]` spectrum uniform in `[min_eig, κ]`, extremes pinned.
pub fn quad_make(n: usize, kappa: f64, convexity: Convexity, rng: &mut RngStream) -> QuadraticEnsemble {
    assert!(n >= 2, "dimension must be >= 2");
    assert!(kappa >= 1.0, "kappa must be >= 1");
    let lo = match convexity {
        Convexity::Sc => 1.0,
        Convexity::C => 0.0,
    };
    let mut r = rng.next_rng();
    let mut eigs: Vec<f64> = (0..n).map(|_| r.random_range(lo..=kappa)).collect();
    eigs.sort_by(f64::total_cmp);
    eigs[0] = lo;
    eigs[n - 1] = kappa;
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
    let frame = g.qr().q();
    let x0 = RealVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
    QuadraticEnsemble::from_parts(eigs, frame, x0, 0.5, 1.0, 0.0)
}

impl QuadraticEnsemble {
    /// Builds an ensemble from an explicit spectrum and orthogonal frame.
    pub fn from_parts(
        eigs: Vec<f64>,
        frame: DMatrix<f64>,
        x0_true: RealVector,
        spread: f64,
        nu2: f64,
        lambda_l1: f64,
    ) -> Self {
        let n = eigs.len();
        assert_eq!(frame.shape(), (n, n));
        assert_eq!(x0_true.len(), n);
        assert!((0.0..1.0).contains(&spread), "spread must lie in [0, 1)");
        assert!(nu2 >= 0.0 && lambda_l1 >= 0.0);
        assert!(eigs.iter().all(|e| *e >= 0.0));
        let qbar = &frame * DMatrix::from_diagonal(&RealVector::from_vec(eigs.clone())) * frame.transpose();
        let mut q = Self {
            eigs,
            frame,
            x0_true,
            spread,
            nu2,
            lambda_l1,
            qbar,
            meta: ProblemMeta::new(n),
        };
        q.refresh_meta();
        q
    }

    pub fn with_noise(self, spread: f64, nu2: f64) -> Self {
        Self::from_parts(self.eigs, self.frame, self.x0_true, spread, nu2, self.lambda_l1)
    }

    pub fn with_l1(self, lambda_l1: f64) -> Self {
        Self::from_parts(self.eigs, self.frame, self.x0_true, self.spread, self.nu2, lambda_l1)
    }

    fn refresh_meta(&mut self) {
        let n = self.eigs.len();
        let lo = self.eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.eigs.iter().cloned().fold(0.0, f64::max);
        let mut meta = ProblemMeta::new(n);
        meta.tau = (lo > 0.0).then_some(lo);
        meta.lipschitz_l = (hi > 0.0).then_some(hi);
        meta.alpha_growth = meta.tau;
        meta.nu2 = Some(self.nu2);
        let base = -0.5 * self.x0_true.dot(&(&self.qbar * &self.x0_true));
        if self.lambda_l1 == 0.0 {
            meta.f_star = Some(base);
            meta.x_star = Some(self.x0_true.as_slice().to_vec());
        } else {
            let model = self.mean_model();
            let sol = fista(&model, &self.x0_true, 1e-13, 2_000_000);
            meta.f_star = Some(sol.value + base);
            meta.x_star = Some(sol.x.as_slice().to_vec());
        }
        self.meta = meta;
    }

    /// Mutable access to the analysis constants, e.g. to hide or override them.
    pub fn meta_mut(&mut self) -> &mut ProblemMeta {
        &mut self.meta
    }

    pub fn eigs(&self) -> &[f64] {
        &self.eigs
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn x0_true(&self) -> &RealVector {
        &self.x0_true
    }

    pub fn mean_matrix(&self) -> &DMatrix<f64> {
        &self.qbar
    }

    pub fn lambda_l1(&self) -> f64 {
        self.lambda_l1
    }

    /// Largest eigenvalue any sampled `Q(ω)` can have.
    pub fn sample_lipschitz(&self) -> f64 {
        self.meta.lipschitz_l.unwrap_or(0.0) * (1.0 + self.spread)
    }

    /// Draws `(ξ, z)` for one realization.
    fn draw(&self, rng: &mut SampleRng, xi: &mut [f64], z: &mut [f64]) {
        let r = self.spread;
        for v in xi.iter_mut() {
            *v = if r > 0.0 { rng.random_range(1.0 - r..=1.0 + r) } else { 1.0 };
        }
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
    }

    fn l1_grad(&self, x: &RealVector, eta: f64, out: &mut RealVector) {
        if self.lambda_l1 == 0.0 {
            return;
        }
        for i in 0..x.len() {
            let g = if eta > 0.0 {
                huber_scalar(x[i], eta).1
            } else {
                x[i].signum() * (x[i] != 0.0) as u8 as f64
            };
            out[i] += self.lambda_l1 * g;
        }
    }

    fn l1_value(&self, x: &RealVector, eta: f64) -> f64 {
        if self.lambda_l1 == 0.0 {
            return 0.0;
        }
        let s: f64 = if eta > 0.0 {
            x.iter().map(|v| huber_scalar(*v, eta).0).sum()
        } else {
            x.lp_norm(1)
        };
        self.lambda_l1 * s
    }

    fn mean_model(&self) -> QuadBatchModel<'_> {
        QuadBatchModel {
            q: self,
            lam: self.eigs.clone(),
            ebar: RealVector::zeros(self.eigs.len()),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let n = self.eigs.len();
        let file = QuadraticFile {
            format: FORMAT.into(),
            version: VERSION,
            eigs: self.eigs.clone(),
            frame: (0..n * n).map(|k| self.frame[(k / n, k % n)]).collect(),
            x0_true: self.x0_true.as_slice().to_vec(),
            spread: self.spread,
            nu2: self.nu2,
            lambda_l1: self.lambda_l1,
        };
        let text = serde_json::to_string_pretty(&file).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: QuadraticFile = serde_json::from_str(&text).map_err(std::io::Error::other)?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(std::io::Error::other(format!(
                "unsupported ensemble file {} v{}",
                f.format, f.version
            )));
        }
        let n = f.eigs.len();
        if f.frame.len() != n * n || f.x0_true.len() != n {
            return Err(std::io::Error::other("inconsistent ensemble dimensions"));
        }
        Ok(Self::from_parts(
            f.eigs,
            DMatrix::from_row_slice(n, n, &f.frame),
            RealVector::from_vec(f.x0_true),
            f.spread,
            f.nu2,
            f.lambda_l1,
        ))
    }
}

impl StochasticProblem for QuadraticEnsemble {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn sample_gradient(&self, x: &RealVector, eta: f64, rng: &mut SampleRng, out: &mut RealVector) {
        let n = x.len();
        let mut xi = vec![0.0; n];
        let mut z = vec![0.0; n];
        self.draw(rng, &mut xi, &mut z);
        let w = self.frame.tr_mul(&(x - &self.x0_true));
        let coef = RealVector::from_fn(n, |i, _| self.eigs[i] * xi[i] * w[i]);
        let scale = self.nu2 / (n as f64).sqrt();
        out.copy_from(&(&self.frame * coef));
        for i in 0..n {
            out[i] += scale * z[i];
        }
        self.l1_grad(x, eta, out);
    }

    fn batch_gradient(&self, x: &RealVector, eta: f64, handle: &SampleHandle) -> Result<RealVector, OracleError> {
        check_point(x, self.dim())?;
        if handle.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        let n = x.len();
        let w = self.frame.tr_mul(&(x - &self.x0_true));
        let mut xi = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut coef = vec![0.0; n];
        let mut esum = vec![0.0; n];
        for (j, mut rng) in handle.iter().enumerate() {
            self.draw(&mut rng, &mut xi, &mut z);
            for i in 0..n {
                coef[i] += self.eigs[i] * xi[i] * w[i];
                esum[i] += z[i];
            }
            if !coef[0].is_finite() {
                return Err(OracleError::NonFinite { index: j as u64 });
            }
        }
        let nb = handle.len() as f64;
        let scale = self.nu2 / (n as f64).sqrt();
        let mut g = &self.frame * RealVector::from_vec(coef) / nb;
        for i in 0..n {
            g[i] += scale * esum[i] / nb;
        }
        self.l1_grad(x, eta, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite {
                index: handle.len() - 1,
            });
        }
        Ok(g)
    }

    fn value(&self, x: &RealVector) -> Option<f64> {
        self.smoothed_value(x, 0.0)
    }

    fn smoothed_value(&self, x: &RealVector, eta: f64) -> Option<f64> {
        let d = x - &self.x0_true;
        let base = -0.5 * self.x0_true.dot(&(&self.qbar * &self.x0_true));
        Some(0.5 * d.dot(&(&self.qbar * &d)) + base + self.l1_value(x, eta))
    }

    fn exact_gradient(&self, x: &RealVector, eta: f64) -> Option<RealVector> {
        let mut g = &self.qbar * (x - &self.x0_true);
        self.l1_grad(x, eta, &mut g);
        Some(g)
    }

    fn batch_model(&self, handle: &SampleHandle) -> Option<Box<dyn CompositeModel + '_>> {
        let n = self.eigs.len();
        let mut xi = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut xsum = vec![0.0; n];
        let mut esum = vec![0.0; n];
        for mut rng in handle.iter() {
            self.draw(&mut rng, &mut xi, &mut z);
            for i in 0..n {
                xsum[i] += xi[i];
                esum[i] += z[i];
            }
        }
        let nb = handle.len() as f64;
        let scale = self.nu2 / (n as f64).sqrt();
        Some(Box::new(QuadBatchModel {
            q: self,
            lam: (0..n).map(|i| self.eigs[i] * xsum[i] / nb).collect(),
            ebar: RealVector::from_fn(n, |i, _| scale * esum[i] / nb),
        }))
    }
}

/// Sample-average model `½(u−x⁰)ᵀQ̄_N(u−x⁰) + ēᵀu + λ‖u‖₁` with `Q̄_N = V diag(λ∘ξ̄) Vᵀ`.
struct QuadBatchModel<'a> {
    q: &'a QuadraticEnsemble,
    lam: Vec<f64>,
    ebar: RealVector,
}

impl CompositeModel for QuadBatchModel<'_> {
    fn dim(&self) -> usize {
        self.lam.len()
    }

    fn smooth_value(&self, u: &RealVector) -> f64 {
        let w = self.q.frame.tr_mul(&(u - &self.q.x0_true));
        let quad: f64 = (0..w.len()).map(|i| self.lam[i] * w[i] * w[i]).sum();
        0.5 * quad + self.ebar.dot(u)
    }

    fn smooth_grad(&self, u: &RealVector) -> RealVector {
        let mut w = self.q.frame.tr_mul(&(u - &self.q.x0_true));
        for i in 0..w.len() {
            w[i] *= self.lam[i];
        }
        &self.q.frame * w + &self.ebar
    }

    fn smooth_lipschitz(&self) -> f64 {
        self.lam.iter().cloned().fold(0.0, f64::max)
    }

    fn h_value(&self, u: &RealVector) -> f64 {
        self.q.lambda_l1 * u.lp_norm(1)
    }

    fn prox_h(&self, v: &RealVector, t: f64) -> RealVector {
        prox_soft_threshold(v, self.q.lambda_l1 * t)
    }
}
