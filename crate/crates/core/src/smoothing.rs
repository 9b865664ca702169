//! Smooth approximations of nonsmooth convex functions.
//!
//! Each smoother produces `f_η` with `f_η ≤ f ≤ f_η + η·β` and an
//! `(α/η)`-Lipschitz gradient. Moreau envelopes are evaluated through a prox,
//! either in closed form or by an inner proximal-gradient solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::RealVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error("smoothing parameter must be > 0, got {0}")]
    Eta(f64),
    #[error("inner prox solver stopped after {iters} iterations with residual {residual:e}")]
    ProxNotConverged { residual: f64, iters: usize },
    #[error("log-sum-exp needs at least two terms, got {0}")]
    TooFewTerms(usize),
    #[error("projection failed: {0}")]
    Projection(String),
}

fn check_eta(eta: f64) -> Result<(), SmoothingError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(SmoothingError::Eta(eta))
    }
}

/// Componentwise `sign(x_i)·max(|x_i| − t, 0)`.
pub fn prox_soft_threshold(x: &RealVector, threshold: f64) -> RealVector {
    assert!(threshold >= 0.0, "threshold must be >= 0");
    x.map(|v| v.signum() * (v.abs() - threshold).max(0.0))
}

/// Scalar Huber function and derivative; `|x| = η` belongs to the quadratic branch.
#[inline]
pub fn huber_scalar(x: f64, eta: f64) -> (f64, f64) {
    if x.abs() <= eta {
        (x * x / (2.0 * eta), x / eta)
    } else {
        (x.abs() - eta / 2.0, x.signum())
    }
}

/// Huber smoothing of `‖x‖₁`.
pub fn huber_l1(x: &RealVector, eta: f64) -> (f64, RealVector) {
    let mut g = RealVector::zeros(x.len());
    let mut v = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let (hv, hg) = huber_scalar(xi, eta);
        v += hv;
        g[i] = hg;
    }
    (v, g)
}

/// `√(‖x‖² + η²) − η`.
pub fn norm2_smooth(x: &RealVector, eta: f64) -> (f64, RealVector) {
    let r = (x.norm_squared() + eta * eta).sqrt();
    (r - eta, x / r)
}

/// An affine form `aᵀx + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub a: RealVector,
    pub b: f64,
}

impl AffineForm {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self {
            a: RealVector::from_vec(a),
            b,
        }
    }

    pub fn eval(&self, x: &RealVector) -> f64 {
        self.a.dot(x) + self.b
    }
}

/// `η ln Σ e^{z_i/η} − η ln(count)` for the affine values `z_i`, with softmax gradient.
pub fn lse_smooth_max(
    terms: &[AffineForm],
    x: &RealVector,
    eta: f64,
) -> Result<(f64, RealVector), SmoothingError> {
    if terms.len() < 2 {
        return Err(SmoothingError::TooFewTerms(terms.len()));
    }
    check_eta(eta)?;
    let z: Vec<f64> = terms.iter().map(|t| t.eval(x)).collect();
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|zi| ((zi - zmax) / eta).exp()).collect();
    let s: f64 = e.iter().sum();
    let value = zmax + eta * s.ln() - eta * (terms.len() as f64).ln();
    let mut g = RealVector::zeros(x.len());
    for (t, ei) in terms.iter().zip(&e) {
        g.axpy(ei / s, &t.a, 1.0);
    }
    Ok((value, g))
}

/// Exact max of the affine forms, with the gradient of the first maximizing term.
pub fn affine_max(terms: &[AffineForm], x: &RealVector) -> (f64, RealVector) {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, t) in terms.iter().enumerate() {
        let v = t.eval(x);
        if v > bv {
            bv = v;
            best = i;
        }
    }
    (bv, terms[best].a.clone())
}

/// `d_X(x)²/(2η)` with gradient `(x − Π_X(x))/η`.
pub fn indicator_smooth<P>(x: &RealVector, project: P, eta: f64) -> Result<(f64, RealVector), SmoothingError>
where
    P: Fn(&RealVector) -> Result<RealVector, SmoothingError>,
{
    check_eta(eta)?;
    let p = project(x)?;
    let d = x - p;
    Ok((d.norm_squared() / (2.0 * eta), d / eta))
}

/// `η_k = (2(n+1)²/(τ²(k+2)))^{1/3}`.
pub fn eta_schedule_diminishing(n: usize, tau: f64, k: u64) -> f64 {
    let n1 = n as f64 + 1.0;
    (2.0 * n1 * n1 / (tau * tau * (k as f64 + 2.0))).cbrt()
}

/// Largest η allowed for the fixed-η Moreau scheme: `min{2/L, (4(n+1)²/τ²)^{1/3}}`.
pub fn moreau_eta_cap(n: usize, lipschitz_l: f64, tau: f64) -> f64 {
    let n1 = n as f64 + 1.0;
    (2.0 / lipschitz_l).min((4.0 * n1 * n1 / (tau * tau)).cbrt())
}

/// Result of a prox evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub u: RealVector,
    /// Stopping residual (0 for closed forms).
    pub residual: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxKind {
    ClosedFormL1,
    ProjectionSet,
    InnerSolver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxSpec {
    pub kind: ProxKind,
    /// Relative stopping tolerance of the inner solver.
    pub tolerance: f64,
    pub max_inner_iters: usize,
}

impl Default for ProxSpec {
    fn default() -> Self {
        Self {
            kind: ProxKind::InnerSolver,
            tolerance: 1e-10,
            max_inner_iters: 100_000,
        }
    }
}

/// A function that can be evaluated and has a prox `argmin_u f(u) + ‖u−x‖²/(2η)`.
pub trait ProxFunction {
    fn value(&self, x: &RealVector) -> f64;
    fn prox(&self, x: &RealVector, eta: f64) -> Result<ProxResult, SmoothingError>;
}

/// `λ‖x‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Norm {
    pub lambda: f64,
}

impl ProxFunction for L1Norm {
    fn value(&self, x: &RealVector) -> f64 {
        self.lambda * x.lp_norm(1)
    }

    fn prox(&self, x: &RealVector, eta: f64) -> Result<ProxResult, SmoothingError> {
        check_eta(eta)?;
        Ok(ProxResult {
            u: prox_soft_threshold(x, self.lambda * eta),
            residual: 0.0,
            iters: 0,
        })
    }
}

/// Indicator of a closed convex set given by its projection. Values outside are `+∞`.
pub struct SetIndicator<P> {
    pub project: P,
    /// Membership tolerance used by `value`.
    pub tol: f64,
}

impl<P> ProxFunction for SetIndicator<P>
where
    P: Fn(&RealVector) -> RealVector,
{
    fn value(&self, x: &RealVector) -> f64 {
        let p = (self.project)(x);
        if (x - p).norm() <= self.tol {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, x: &RealVector, eta: f64) -> Result<ProxResult, SmoothingError> {
        check_eta(eta)?;
        Ok(ProxResult {
            u: (self.project)(x),
            residual: 0.0,
            iters: 0,
        })
    }
}

/// A deterministic composite `g(u) + h(u)` with smooth `g` and prox-friendly `h`.
pub trait CompositeModel: Send + Sync {
    fn dim(&self) -> usize;
    fn smooth_value(&self, u: &RealVector) -> f64;
    fn smooth_grad(&self, u: &RealVector) -> RealVector;
    /// Lipschitz constant of `∇g`.
    fn smooth_lipschitz(&self) -> f64;
    fn h_value(&self, u: &RealVector) -> f64;
    /// `argmin_w h(w) + ‖w − v‖²/(2t)`.
    fn prox_h(&self, v: &RealVector, t: f64) -> RealVector;
}

/// Solves `min_u g(u) + h(u) + ‖u−x‖²/(2η)` by proximal gradient with step `1/(L + 1/η)`.
///
/// Stops when the gradient-mapping norm is at most `tolerance·(1+‖x‖)`.
pub fn prox_inner<M: CompositeModel + ?Sized>(
    model: &M,
    x: &RealVector,
    eta: f64,
    spec: &ProxSpec,
) -> Result<ProxResult, SmoothingError> {
    check_eta(eta)?;
    let t = 1.0 / (model.smooth_lipschitz() + 1.0 / eta);
    let target = spec.tolerance * (1.0 + x.norm());
    let mut u = x.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=spec.max_inner_iters {
        let mut grad = model.smooth_grad(&u);
        grad += (&u - x) / eta;
        let v = &u - grad * t;
        let next = model.prox_h(&v, t);
        residual = (&u - &next).norm() / t;
        u = next;
        if residual <= target {
            return Ok(ProxResult {
                u,
                residual,
                iters: it,
            });
        }
    }
    Err(SmoothingError::ProxNotConverged {
        residual,
        iters: spec.max_inner_iters,
    })
}

/// Adapter giving a composite model a [`ProxFunction`] interface.
pub struct Composite<'a, M: ?Sized> {
    pub model: &'a M,
    pub spec: ProxSpec,
}

impl<M: CompositeModel + ?Sized> ProxFunction for Composite<'_, M> {
    fn value(&self, x: &RealVector) -> f64 {
        self.model.smooth_value(x) + self.model.h_value(x)
    }

    fn prox(&self, x: &RealVector, eta: f64) -> Result<ProxResult, SmoothingError> {
        prox_inner(self.model, x, eta, &self.spec)
    }
}

/// Moreau envelope evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauEval {
    pub value: f64,
    pub grad: RealVector,
    pub prox: ProxResult,
}

/// `f_η(x) = f(u*) + ‖u*−x‖²/(2η)` and `∇f_η(x) = (x − u*)/η`, `u* = prox_{η,f}(x)`.
pub fn moreau_value_grad<F: ProxFunction + ?Sized>(
    f: &F,
    x: &RealVector,
    eta: f64,
) -> Result<MoreauEval, SmoothingError> {
    check_eta(eta)?;
    let prox = f.prox(x, eta)?;
    let d = x - &prox.u;
    let value = f.value(&prox.u) + d.norm_squared() / (2.0 * eta);
    Ok(MoreauEval {
        value,
        grad: d / eta,
        prox,
    })
}

/// A nonsmooth function with an `(α, β)` smoothing family.
pub trait Smoother {
    /// The unsmoothed `f(x)`.
    fn exact(&self, x: &RealVector) -> f64;
    /// `(f_η(x), ∇f_η(x))`.
    fn smoothed(&self, x: &RealVector, eta: f64) -> (f64, RealVector);
    /// Smoothness scale; `∇f_η` is `(α/η)`-Lipschitz.
    fn alpha(&self) -> f64;
    /// Smoothing gap constant.
    fn beta(&self) -> f64;
}

/// `‖x‖₂`, (1,1)-smoothable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Norm2;

impl Smoother for Norm2 {
    fn exact(&self, x: &RealVector) -> f64 {
        x.norm()
    }
    fn smoothed(&self, x: &RealVector, eta: f64) -> (f64, RealVector) {
        norm2_smooth(x, eta)
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        1.0
    }
}

/// Max of affine forms, (max‖a_i‖², ln count)-smoothable.
#[derive(Debug, Clone)]
pub struct LseMax {
    pub terms: Vec<AffineForm>,
}

impl LseMax {
    /// `max_i x_i` over the coordinates of `R^n`.
    pub fn coordinates(n: usize) -> Self {
        let terms = (0..n)
            .map(|i| {
                let mut a = vec![0.0; n];
                a[i] = 1.0;
                AffineForm::new(a, 0.0)
            })
            .collect();
        Self { terms }
    }
}

impl Smoother for LseMax {
    fn exact(&self, x: &RealVector) -> f64 {
        affine_max(&self.terms, x).0
    }
    fn smoothed(&self, x: &RealVector, eta: f64) -> (f64, RealVector) {
        lse_smooth_max(&self.terms, x, eta).expect("LseMax holds at least two terms")
    }
    fn alpha(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.a.norm_squared())
            .fold(0.0, f64::max)
    }
    fn beta(&self) -> f64 {
        (self.terms.len() as f64).ln()
    }
}

/// `‖x‖₁` in `R^n` with Huber smoothing, (1, n/2)-smoothable.
#[derive(Debug, Clone, Copy)]
pub struct HuberL1 {
    pub n: usize,
}

impl Smoother for HuberL1 {
    fn exact(&self, x: &RealVector) -> f64 {
        x.lp_norm(1)
    }
    fn smoothed(&self, x: &RealVector, eta: f64) -> (f64, RealVector) {
        huber_l1(x, eta)
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        self.n as f64 / 2.0
    }
}

/// Moreau envelope of `λ‖x‖₁` in `R^n`, (1, B²)-smoothable with `B = λ√n`.
#[derive(Debug, Clone, Copy)]
pub struct MoreauL1 {
    pub lambda: f64,
    pub n: usize,
}

impl Smoother for MoreauL1 {
    fn exact(&self, x: &RealVector) -> f64 {
        self.lambda * x.lp_norm(1)
    }
    fn smoothed(&self, x: &RealVector, eta: f64) -> (f64, RealVector) {
        let m = moreau_value_grad(&L1Norm { lambda: self.lambda }, x, eta)
            .expect("closed-form prox");
        (m.value, m.grad)
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        self.lambda * self.lambda * self.n as f64
    }
}

/// A smoother bound to a fixed η.
pub struct SmoothedView<'a> {
    pub smoother: &'a dyn Smoother,
    pub eta: f64,
}

impl<'a> SmoothedView<'a> {
    pub fn new(smoother: &'a dyn Smoother, eta: f64) -> Result<Self, SmoothingError> {
        check_eta(eta)?;
        Ok(Self { smoother, eta })
    }

    pub fn value(&self, x: &RealVector) -> f64 {
        self.smoother.smoothed(x, self.eta).0
    }

    pub fn gradient(&self, x: &RealVector) -> RealVector {
        self.smoother.smoothed(x, self.eta).1
    }

    pub fn alpha_smooth(&self) -> f64 {
        self.smoother.alpha()
    }

    pub fn beta(&self) -> f64 {
        self.smoother.beta()
    }

    /// Gradient Lipschitz constant `α/η`.
    pub fn lipschitz(&self) -> f64 {
        self.smoother.alpha() / self.eta
    }

    /// Upper bound `η·β` on `f − f_η`.
    pub fn gap_bound(&self) -> f64 {
        self.eta * self.smoother.beta()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen (negative when every point has slack).
    pub max_violation: f64,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

const INEQ_TOL: f64 = 1e-12;

fn record(report: &mut InequalityReport, lhs: f64, rhs: f64) {
    let v = lhs - rhs;
    report.checked += 1;
    report.max_violation = report.max_violation.max(v);
    if v > INEQ_TOL * (1.0 + rhs.abs()) {
        report.violations += 1;
    }
}

/// Checks `f_η ≤ f ≤ f_η + η·β` at every point.
pub fn check_sandwich(s: &dyn Smoother, eta: f64, points: &[RealVector]) -> InequalityReport {
    let mut r = InequalityReport {
        checked: 0,
        violations: 0,
        max_violation: f64::NEG_INFINITY,
    };
    for x in points {
        let f = s.exact(x);
        let fe = s.smoothed(x, eta).0;
        record(&mut r, fe, f);
        record(&mut r, f, fe + eta * s.beta());
    }
    r
}

/// Checks `f_{η_{k+1}}(x) ≤ f_{η_k}(x) + ½(η_k²/η_{k+1} − η_k)B²` at every point.
pub fn check_smoothing_chain(
    s: &dyn Smoother,
    eta_k: f64,
    eta_k1: f64,
    b: f64,
    points: &[RealVector],
) -> InequalityReport {
    assert!(eta_k1 <= eta_k && eta_k1 > 0.0, "need 0 < eta_k1 <= eta_k");
    let slack = 0.5 * (eta_k * eta_k / eta_k1 - eta_k) * b * b;
    let mut r = InequalityReport {
        checked: 0,
        violations: 0,
        max_violation: f64::NEG_INFINITY,
    };
    for x in points {
        let lhs = s.smoothed(x, eta_k1).0;
        let rhs = s.smoothed(x, eta_k).0 + slack;
        record(&mut r, lhs, rhs);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> RealVector {
        RealVector::from_vec(x.to_vec())
    }

    fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    fn fd_grad(f: impl Fn(&RealVector) -> f64, x: &RealVector) -> RealVector {
        let h = 1e-6 * (1.0 + x.norm());
        let mut g = RealVector::zeros(x.len());
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(prox_soft_threshold(&v(&[3.0, -0.5]), 1.0), v(&[2.0, 0.0]));
        let x = v(&[1.5, -2.0, 0.0]);
        assert_eq!(prox_soft_threshold(&x, 0.0), x);
        assert_eq!(prox_soft_threshold(&v(&[-2.0]), 5.0), v(&[0.0]));
        // grid oracle for the first component
        let u = grid_argmin(|u| u.abs() + (u - 3.0).powi(2) / 2.0, -5.0, 5.0);
        assert!((u - 2.0).abs() < 1e-4);
    }

    #[test]
    fn moreau_l1_examples() {
        let f = L1Norm { lambda: 1.0 };
        let m = moreau_value_grad(&f, &v(&[0.0]), 1.0).unwrap();
        assert_eq!((m.value, m.grad[0]), (0.0, 0.0));
        let m = moreau_value_grad(&f, &v(&[2.0]), 1.0).unwrap();
        assert_eq!(m.prox.u[0], 1.0);
        assert_eq!(m.value, 1.5);
        assert_eq!(m.grad[0], 1.0);
        let u = grid_argmin(|u| u.abs() + (u - 2.0).powi(2) / 2.0, -5.0, 5.0);
        assert!((u - 1.0).abs() < 1e-4);
    }

    #[test]
    fn moreau_of_indicator_inside_is_zero() {
        let f = SetIndicator {
            project: |x: &RealVector| x.map(|v| v.min(0.0)),
            tol: 0.0,
        };
        let m = moreau_value_grad(&f, &v(&[-1.0, -3.0]), 0.7).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.grad, v(&[0.0, 0.0]));
    }

    #[test]
    fn lse_examples() {
        let terms = vec![AffineForm::new(vec![1.0, 0.0], 0.0), AffineForm::new(vec![0.0, 2.0], 0.0)];
        let (val, g) = lse_smooth_max(&terms, &v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(val, 0.0);
        assert_relative_eq!(g, v(&[0.5, 1.0]), epsilon = 1e-15);

        let coords = LseMax::coordinates(2);
        let eta = 0.01;
        let (val, g) = lse_smooth_max(&coords.terms, &v(&[10.0, 0.0]), eta).unwrap();
        // 10 + η ln(1 + e^{-1000}) − η ln 2; the middle term underflows to exactly 0
        let exact = 10.0 - eta * 2f64.ln();
        assert!((val - exact).abs() <= 1e-12);
        assert_relative_eq!(g, v(&[1.0, 0.0]), epsilon = 1e-15);

        assert_eq!(
            lse_smooth_max(&coords.terms[..1], &v(&[0.0, 0.0]), 1.0).unwrap_err(),
            SmoothingError::TooFewTerms(1)
        );
    }

    #[test]
    fn lse_no_overflow_tiny_eta() {
        let coords = LseMax::coordinates(3);
        let x = v(&[500.0, 499.0, -20.0]);
        let (val, g) = lse_smooth_max(&coords.terms, &x, 1e-3).unwrap();
        assert!(val.is_finite() && g.iter().all(|g| g.is_finite()));
        assert!(val <= 500.0 && val >= 500.0 - 1e-3 * 3f64.ln());
    }

    #[test]
    fn huber_examples() {
        let (val, g) = huber_l1(&v(&[0.0, 0.0]), 0.5);
        assert_eq!(val, 0.0);
        assert_eq!(g, v(&[0.0, 0.0]));
        let eta = 0.3;
        let (val, g) = huber_l1(&v(&[eta]), eta);
        assert_relative_eq!(val, eta / 2.0, epsilon = 1e-16);
        assert_relative_eq!(eta - eta / 2.0, eta * eta / (2.0 * eta), epsilon = 1e-16);
        assert_eq!(g[0], 1.0);
        let (val, g) = huber_l1(&v(&[3.0]), 1.0);
        assert_eq!(val, 2.5);
        assert_eq!(g[0], 1.0);
        let fd = fd_grad(|x| huber_l1(x, 1.0).0, &v(&[3.0]));
        assert!((fd[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn norm2_examples() {
        let (val, g) = norm2_smooth(&v(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(val, 0.0);
        assert_eq!(g.norm(), 0.0);
        let (val, g) = norm2_smooth(&v(&[0.6, 0.8]), 1.0);
        assert_relative_eq!(val, 2f64.sqrt() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn indicator_examples() {
        let proj = |x: &RealVector| Ok(x.map(|v| v.min(0.0)));
        let (val, g) = indicator_smooth(&v(&[-2.0]), proj, 1.0).unwrap();
        assert_eq!((val, g[0]), (0.0, 0.0));
        let (val, g) = indicator_smooth(&v(&[3.0]), proj, 1.0).unwrap();
        assert_eq!((val, g[0]), (4.5, 3.0));
        let x = v(&[0.7, -0.4, 1.3]);
        let fd = fd_grad(|x| indicator_smooth(x, proj, 0.3).unwrap().0, &x);
        let (_, g) = indicator_smooth(&x, proj, 0.3).unwrap();
        assert!((fd - &g).norm() / g.norm() < 1e-6);
        assert!(matches!(indicator_smooth(&x, proj, 0.0), Err(SmoothingError::Eta(_))));
    }

    #[test]
    fn eta_diminishing_examples() {
        assert_relative_eq!(eta_schedule_diminishing(1, 2.0, 0), 1.0, epsilon = 1e-15);
        let expected = (2.0f64 * 4.0 / (4.0 * 8.0)).powf(1.0 / 3.0);
        assert_relative_eq!(eta_schedule_diminishing(1, 2.0, 6), expected, epsilon = 1e-15);
        for k in 0..1000 {
            assert!(eta_schedule_diminishing(5, 0.5, k + 1) < eta_schedule_diminishing(5, 0.5, k));
        }
    }

    struct QuadL1 {
        d: Vec<f64>,
        c: Vec<f64>,
        lambda: f64,
    }

    impl CompositeModel for QuadL1 {
        fn dim(&self) -> usize {
            self.d.len()
        }
        fn smooth_value(&self, u: &RealVector) -> f64 {
            (0..u.len())
                .map(|i| 0.5 * self.d[i] * (u[i] - self.c[i]).powi(2))
                .sum()
        }
        fn smooth_grad(&self, u: &RealVector) -> RealVector {
            RealVector::from_fn(u.len(), |i, _| self.d[i] * (u[i] - self.c[i]))
        }
        fn smooth_lipschitz(&self) -> f64 {
            self.d.iter().cloned().fold(0.0, f64::max)
        }
        fn h_value(&self, u: &RealVector) -> f64 {
            self.lambda * u.lp_norm(1)
        }
        fn prox_h(&self, v: &RealVector, t: f64) -> RealVector {
            prox_soft_threshold(v, self.lambda * t)
        }
    }

    #[test]
    fn inner_prox_matches_closed_form() {
        // separable: prox of ½d(u−c)² + λ|u| at x with η has closed form per coordinate
        let m = QuadL1 {
            d: vec![1.0, 4.0, 0.5],
            c: vec![2.0, -1.0, 0.1],
            lambda: 0.3,
        };
        let x = v(&[0.5, 0.4, -2.0]);
        let eta = 0.8;
        let r = prox_inner(&m, &x, eta, &ProxSpec::default()).unwrap();
        for i in 0..3 {
            let a = m.d[i] + 1.0 / eta;
            let b = m.d[i] * m.c[i] + x[i] / eta;
            let u = (b.abs() - m.lambda).max(0.0) * b.signum() / a;
            assert!((r.u[i] - u).abs() < 1e-9, "{i}: {} vs {u}", r.u[i]);
        }
        let tight = ProxSpec {
            max_inner_iters: 2,
            ..ProxSpec::default()
        };
        assert!(matches!(
            prox_inner(&m, &x, eta, &tight),
            Err(SmoothingError::ProxNotConverged { iters: 2, .. })
        ));
    }

    #[test]
    fn moreau_minimizer_preserved() {
        // min of ½d(u−c)² + λ|u|: soft-threshold per coordinate
        let m = QuadL1 {
            d: vec![1.0, 2.0, 3.0],
            c: vec![1.0, -0.1, 0.5],
            lambda: 0.4,
        };
        let xstar = RealVector::from_fn(3, |i, _| {
            let b = m.c[i];
            b.signum() * (b.abs() - m.lambda / m.d[i]).max(0.0)
        });
        let f = Composite {
            model: &m,
            spec: ProxSpec::default(),
        };
        // gradient descent on the envelope with step η (its gradient is 1/η-Lipschitz)
        let eta = 0.5;
        let mut x = RealVector::from_element(3, 3.0);
        for _ in 0..2000 {
            let e = moreau_value_grad(&f, &x, eta).unwrap();
            if e.grad.norm() < 1e-13 {
                break;
            }
            x -= e.grad * eta;
        }
        assert!((x - xstar).norm() < 1e-8);
    }

    fn arb_point(n: usize) -> impl Strategy<Value = RealVector> {
        prop::collection::vec(-5.0f64..5.0, n).prop_map(RealVector::from_vec)
    }

    proptest! {
        #[test]
        fn sandwich_all_smoothers(x in arb_point(4), eta in 0.01f64..3.0) {
            let smoothers: Vec<Box<dyn Smoother>> = vec![
                Box::new(Norm2),
                Box::new(LseMax::coordinates(4)),
                Box::new(HuberL1 { n: 4 }),
                Box::new(MoreauL1 { lambda: 0.7, n: 4 }),
            ];
            for s in &smoothers {
                let r = check_sandwich(s.as_ref(), eta, std::slice::from_ref(&x));
                prop_assert!(r.pass(), "max violation {}", r.max_violation);
            }
        }

        #[test]
        fn gradients_match_fd(x in arb_point(3), eta in 0.2f64..2.0) {
            let smoothers: Vec<Box<dyn Smoother>> = vec![
                Box::new(Norm2),
                Box::new(LseMax::coordinates(3)),
            ];
            for s in &smoothers {
                let g = s.smoothed(&x, eta).1;
                let fd = fd_grad(|y| s.smoothed(y, eta).0, &x);
                prop_assert!((&fd - &g).norm() <= 1e-5 * g.norm().max(1e-3));
            }
        }

        #[test]
        fn lipschitz_certificate(x in arb_point(3), y in arb_point(3), eta in 0.05f64..2.0) {
            let smoothers: Vec<Box<dyn Smoother>> = vec![
                Box::new(Norm2),
                Box::new(LseMax::coordinates(3)),
                Box::new(HuberL1 { n: 3 }),
                Box::new(MoreauL1 { lambda: 1.3, n: 3 }),
            ];
            for s in &smoothers {
                let view = SmoothedView::new(s.as_ref(), eta).unwrap();
                let d = (view.gradient(&x) - view.gradient(&y)).norm();
                prop_assert!(d <= view.lipschitz() * (&x - &y).norm() * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn l1_prox_optimality(x in arb_point(5), eta in 0.01f64..3.0, lambda in 0.0f64..2.0) {
            // x − u ∈ η λ ∂‖u‖₁
            let u = L1Norm { lambda }.prox(&x, eta).unwrap().u;
            for i in 0..5 {
                let r = x[i] - u[i];
                if u[i] != 0.0 {
                    prop_assert!((r - eta * lambda * u[i].signum()).abs() < 1e-12);
                } else {
                    prop_assert!(r.abs() <= eta * lambda + 1e-12);
                }
            }
        }
    }

    #[test]
    fn chain_inequality_norm2_and_lse() {
        let b = 2f64.sqrt();
        let pts: Vec<RealVector> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                v(&[3.0 * t.sin(), 2.0 * (1.3 * t).cos() - 0.5])
            })
            .collect();
        assert!(check_smoothing_chain(&Norm2, 1.0, 0.5, b, &pts).pass());
        assert!(check_smoothing_chain(&LseMax::coordinates(2), 1.0, 0.5, b, &pts).pass());
        assert!(check_smoothing_chain(&Norm2, 0.7, 0.7, b, &pts).pass());
    }
}
