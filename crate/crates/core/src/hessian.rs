//! Limited-memory BFGS inverse-Hessian approximations.
//!
//! Curvature pairs are stored in a bounded queue. The production path applies
//! `H_k` matrix-free with the two-loop recursion; the dense recursion and its
//! inverse exist for certificates.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::RealVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HessianError {
    #[error("curvature condition failed at iteration {formed_at}: s'y = {sty:e}")]
    Curvature { sty: f64, formed_at: u64 },
    #[error("zero step at iteration {formed_at}; no pair formed")]
    ZeroStep { formed_at: u64 },
    #[error("missing parameter `{0}` for the requested regime")]
    MissingParam(&'static str),
    #[error("memory depth must be >= 1")]
    Depth,
}

/// Pair construction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `y = Δ∇F`
    Sc,
    /// `y = Δ∇F + μ^δ̄ s`
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePair {
    pub s: RealVector,
    pub y: RealVector,
    pub formed_at: u64,
    pub mu_used: f64,
    pub eta_used: f64,
    /// cached `sᵀy`
    pub sty: f64,
}

/// Builds the pair `(s, y)` from two gradients evaluated on the same batch.
///
/// In [`PairMode::C`] the regularizer `μ^δ̄ s` is added to the gradient difference.
#[allow(clippy::too_many_arguments)]
pub fn collect_pair(
    mode: PairMode,
    x_i: &RealVector,
    x_prev: &RealVector,
    grad_at_xi: &RealVector,
    grad_at_xprev: &RealVector,
    mu_i: f64,
    eta_i: f64,
    delta_bar: f64,
    formed_at: u64,
) -> Result<CurvaturePair, HessianError> {
    let s = x_i - x_prev;
    if s.iter().all(|v| *v == 0.0) {
        return Err(HessianError::ZeroStep { formed_at });
    }
    let mut y = grad_at_xi - grad_at_xprev;
    if mode == PairMode::C {
        y.axpy(mu_i.powf(delta_bar), &s, 1.0);
    }
    let sty = s.dot(&y);
    if !(sty > 0.0) {
        return Err(HessianError::Curvature { sty, formed_at });
    }
    Ok(CurvaturePair {
        s,
        y,
        formed_at,
        mu_used: mu_i,
        eta_used: eta_i,
        sty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsMemory {
    m: usize,
    pairs: VecDeque<CurvaturePair>,
    pub mode: PairMode,
    pub delta: f64,
    pub delta_bar: f64,
}

impl LbfgsMemory {
    pub fn new(m: usize, mode: PairMode, delta: f64, delta_bar: f64) -> Result<Self, HessianError> {
        if m == 0 {
            return Err(HessianError::Depth);
        }
        Ok(Self {
            m,
            pairs: VecDeque::with_capacity(m),
            mode,
            delta,
            delta_bar,
        })
    }

    pub fn depth(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    pub fn newest(&self) -> Option<&CurvaturePair> {
        self.pairs.back()
    }

    /// Appends a pair, evicting the oldest beyond depth `m`.
    pub fn push(&mut self, pair: CurvaturePair) {
        if self.pairs.len() == self.m {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Initial scaling `sᵀy/yᵀy` from the newest pair.
    pub fn initial_scaling(&self) -> f64 {
        match self.pairs.back() {
            Some(p) => p.sty / p.y.norm_squared(),
            None => 1.0,
        }
    }

    /// `H_k v` via the two-loop recursion. Empty memory gives `v`.
    pub fn apply(&self, v: &RealVector) -> RealVector {
        let k = self.pairs.len();
        if k == 0 {
            return v.clone();
        }
        let mut q = v.clone();
        let mut alpha = vec![0.0; k];
        for (i, p) in self.pairs.iter().enumerate().rev() {
            let a = p.s.dot(&q) / p.sty;
            alpha[i] = a;
            q.axpy(-a, &p.y, 1.0);
        }
        let mut r = q * self.initial_scaling();
        for (i, p) in self.pairs.iter().enumerate() {
            let b = p.y.dot(&r) / p.sty;
            r.axpy(alpha[i] - b, &p.s, 1.0);
        }
        r
    }

    /// Dense `H_k` from the recursion `H ← (I − ρ y sᵀ)ᵀ H (I − ρ y sᵀ) + ρ s sᵀ`.
    pub fn materialize_dense(&self, n: usize) -> DMatrix<f64> {
        let eye = DMatrix::<f64>::identity(n, n);
        let mut h = &eye * self.initial_scaling();
        for p in &self.pairs {
            let rho = 1.0 / p.sty;
            let v = &eye - (&p.y * p.s.transpose()) * rho;
            h = v.transpose() * h * &v + (&p.s * p.s.transpose()) * rho;
        }
        h
    }

    /// Dense `B_k = H_k⁻¹` from `B ← B − B s sᵀ B/(sᵀ B s) + y yᵀ/(yᵀ s)`, `B₀ = (yᵀy/sᵀy) I`.
    pub fn materialize_inverse(&self, n: usize) -> DMatrix<f64> {
        let mut b = DMatrix::<f64>::identity(n, n) / self.initial_scaling();
        for p in &self.pairs {
            let bs = &b * &p.s;
            let sbs = p.s.dot(&bs);
            b = b - (&bs * bs.transpose()) / sbs + (&p.y * p.y.transpose()) / p.sty;
        }
        b
    }
}

/// Convenience wrapper for [`LbfgsMemory::apply`].
pub fn apply_inverse_hessian(mem: &LbfgsMemory, v: &RealVector) -> RealVector {
    mem.apply(v)
}

/// Convenience wrapper for [`LbfgsMemory::materialize_dense`].
pub fn materialize_dense(mem: &LbfgsMemory, n: usize) -> DMatrix<f64> {
    mem.materialize_dense(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ScSmooth,
    ScMoreau,
    CSmooth,
    CSmoothed,
}

/// Inputs for [`theoretical_bounds`]; each regime reads a subset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub m: usize,
    pub n: usize,
    pub lipschitz_l: Option<f64>,
    pub tau: Option<f64>,
    pub mu_k: Option<f64>,
    pub eta_k: Option<f64>,
    pub mu0: Option<f64>,
    pub delta: Option<f64>,
    pub delta_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianBounds {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub regime: Regime,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64, HessianError> {
    v.ok_or(HessianError::MissingParam(name))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Eigenvalue bounds `λ̲ I ⪯ H_k ⪯ λ̄ I` for the given regime.
///
/// Upper bounds are evaluated in log space and may be `+∞` when they exceed
/// the floating-point range.
pub fn theoretical_bounds(regime: Regime, p: &BoundParams) -> Result<HessianBounds, HessianError> {
    let nm = (p.n + p.m) as f64;
    let m = p.m as i32;
    let (lo, hi) = match regime {
        Regime::ScSmooth => {
            let l = need(p.lipschitz_l, "L")?;
            let tau = need(p.tau, "tau")?;
            (1.0 / (l * nm), (l * nm / tau).powi(m))
        }
        Regime::ScMoreau => {
            let eta = need(p.eta_k, "eta_k")?;
            let tau = need(p.tau, "tau")?;
            (eta / nm, (nm / (eta * tau)).powi(m))
        }
        Regime::CSmooth => {
            let l = need(p.lipschitz_l, "L")?;
            let mu0 = need(p.mu0, "mu0")?;
            let mu_k = need(p.mu_k, "mu_k")?;
            let db = need(p.delta_bar, "delta_bar")?;
            let c = l + mu0.powf(db);
            let ln_lambda = (nm - 1.0) * (nm.ln() + c.ln()) - ln_factorial(p.n - 1);
            (1.0 / (nm * c), (ln_lambda - db * nm * mu_k.ln()).exp())
        }
        Regime::CSmoothed => {
            let eta = need(p.eta_k, "eta_k")?;
            let mu0 = need(p.mu0, "mu0")?;
            let mu_k = need(p.mu_k, "mu_k")?;
            let d = need(p.delta, "delta")?;
            let db = need(p.delta_bar, "delta_bar")?;
            let c = 1.0 / eta.powf(d) + mu0.powf(db);
            let ln_hi = (nm - 1.0) * (nm.ln() + c.ln()) - ln_factorial(p.n - 1) - nm * db * mu_k.ln();
            (1.0 / (nm * c), ln_hi.exp())
        }
    };
    Ok(HessianBounds {
        lambda_lo: lo,
        lambda_hi: hi,
        regime,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecantReport {
    /// `sᵀy` for every stored pair, oldest first.
    pub sty: Vec<f64>,
    /// `‖H y − s‖/‖s‖` for the newest pair.
    pub secant_residual: f64,
}

impl SecantReport {
    pub fn pass(&self) -> bool {
        self.sty.iter().all(|v| *v > 0.0) && self.secant_residual <= 1e-9
    }
}

/// Checks the curvature condition on every pair and the secant equation on the newest.
pub fn verify_secant(mem: &LbfgsMemory) -> SecantReport {
    let sty = mem.pairs().map(|p| p.s.dot(&p.y)).collect();
    let secant_residual = match mem.newest() {
        Some(p) => (mem.apply(&p.y) - &p.s).norm() / p.s.norm(),
        None => f64::INFINITY,
    };
    SecantReport {
        sty,
        secant_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> RealVector {
        RealVector::from_vec(x.to_vec())
    }

    fn pair(s: &[f64], y: &[f64], k: u64) -> CurvaturePair {
        collect_pair(PairMode::Sc, &v(s), &RealVector::zeros(s.len()), &v(y), &RealVector::zeros(s.len()), 0.0, 0.0, 1.0, k)
            .unwrap()
    }

    fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        let d = DMatrix::from_diagonal(&RealVector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
        &q * d * q.transpose()
    }

    fn random_memory(n: usize, m: usize, rng: &mut ChaCha8Rng) -> LbfgsMemory {
        let mut mem = LbfgsMemory::new(m, PairMode::Sc, 1.0, 1.0).unwrap();
        for k in 0..(m + 2) {
            let a = random_spd(n, 0.1, 10.0, rng);
            let s = RealVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let y = &a * &s;
            mem.push(collect_pair(PairMode::Sc, &s, &RealVector::zeros(n), &y, &RealVector::zeros(n), 0.0, 0.0, 1.0, 2 * k as u64 + 1).unwrap());
        }
        mem
    }

    #[test]
    fn empty_memory_is_identity() {
        let mem = LbfgsMemory::new(3, PairMode::Sc, 1.0, 1.0).unwrap();
        let x = v(&[1.0, -2.0, 3.0]);
        assert_eq!(mem.apply(&x), x);
        assert_eq!(mem.materialize_dense(3), DMatrix::identity(3, 3));
        assert!(verify_secant(&mem).secant_residual.is_infinite());
    }

    #[test]
    fn s_equals_y_gives_identity() {
        let mut mem = LbfgsMemory::new(1, PairMode::Sc, 1.0, 1.0).unwrap();
        mem.push(pair(&[1.0, 2.0, -1.0], &[1.0, 2.0, -1.0], 1));
        let x = v(&[0.3, -0.7, 2.0]);
        assert!((mem.apply(&x) - &x).norm() < 1e-15);
    }

    #[test]
    fn scaled_identity_pair() {
        // A = 2I: y = 2s, H = I/2 on all of R^n
        let mut mem = LbfgsMemory::new(1, PairMode::Sc, 1.0, 1.0).unwrap();
        mem.push(pair(&[1.0, 3.0], &[2.0, 6.0], 1));
        let x = v(&[5.0, -1.0]);
        assert!((mem.apply(&x) - &x / 2.0).norm() < 1e-15);
        let h = mem.materialize_dense(2);
        assert!((h - DMatrix::identity(2, 2) / 2.0).abs().max() < 1e-15);
    }

    #[test]
    fn c_mode_zero_function() {
        let s = v(&[1.0, -2.0]);
        let z = RealVector::zeros(2);
        let p = collect_pair(PairMode::C, &s, &z, &z, &z, 0.25, 0.0, 0.5, 3).unwrap();
        assert_eq!(p.y, &s * 0.5);
        assert_eq!(p.sty, 0.5 * 5.0);
    }

    #[test]
    fn sc_mode_quadratic_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let (xi, xp) = (v(&[1.0, 1.0]), v(&[0.5, -1.0]));
        let p = collect_pair(PairMode::Sc, &xi, &xp, &(&a * &xi), &(&a * &xp), 0.0, 0.0, 1.0, 1).unwrap();
        assert_eq!(p.y, &a * (&xi - &xp));
    }

    #[test]
    fn pair_errors() {
        let z = RealVector::zeros(2);
        let x = v(&[1.0, 0.0]);
        assert_eq!(
            collect_pair(PairMode::Sc, &x, &x, &z, &z, 0.0, 0.0, 1.0, 5).unwrap_err(),
            HessianError::ZeroStep { formed_at: 5 }
        );
        let err = collect_pair(PairMode::Sc, &x, &z, &v(&[-1.0, 0.0]), &z, 0.0, 0.0, 1.0, 7).unwrap_err();
        assert!(matches!(err, HessianError::Curvature { formed_at: 7, .. }));
    }

    #[test]
    fn injected_negative_pair_fails_report() {
        let mut mem = LbfgsMemory::new(2, PairMode::Sc, 1.0, 1.0).unwrap();
        mem.push(pair(&[1.0, 0.0], &[2.0, 0.0], 1));
        let mut bad = pair(&[0.0, 1.0], &[0.0, 1.0], 3);
        bad.y = -bad.y;
        bad.sty = -bad.sty;
        mem.push(bad);
        assert!(!verify_secant(&mem).pass());
    }

    #[test]
    fn depth_is_bounded() {
        let mut mem = LbfgsMemory::new(2, PairMode::Sc, 1.0, 1.0).unwrap();
        for k in 0..5 {
            mem.push(pair(&[1.0, k as f64], &[2.0, k as f64], 2 * k + 1));
        }
        let at: Vec<u64> = mem.pairs().map(|p| p.formed_at).collect();
        assert_eq!(at, vec![7, 9]);
        assert!(LbfgsMemory::new(0, PairMode::Sc, 1.0, 1.0).is_err());
    }

    #[test]
    fn bound_formulas() {
        let p = BoundParams {
            m: 1,
            n: 3,
            lipschitz_l: Some(2.0),
            tau: Some(1.0),
            ..Default::default()
        };
        let b = theoretical_bounds(Regime::ScSmooth, &p).unwrap();
        assert_eq!((b.lambda_lo, b.lambda_hi), (0.125, 8.0));

        let p = BoundParams {
            m: 1,
            n: 3,
            eta_k: Some(0.5),
            tau: Some(1.0),
            ..Default::default()
        };
        let b = theoretical_bounds(Regime::ScMoreau, &p).unwrap();
        assert_eq!((b.lambda_lo, b.lambda_hi), (0.125, 8.0));

        let mk = 0.5;
        let p = BoundParams {
            m: 1,
            n: 2,
            lipschitz_l: Some(1.0),
            mu0: Some(1.0),
            mu_k: Some(mk),
            delta_bar: Some(1.0),
            ..Default::default()
        };
        let b = theoretical_bounds(Regime::CSmooth, &p).unwrap();
        assert!((b.lambda_lo - 1.0 / 6.0).abs() < 1e-15);
        assert!((b.lambda_hi - 36.0 * mk.powi(-3)).abs() < 1e-10);

        let p = BoundParams {
            m: 2,
            n: 3,
            eta_k: Some(0.25),
            mu0: Some(1.0),
            mu_k: Some(0.5),
            delta: Some(0.5),
            delta_bar: Some(0.5),
            ..Default::default()
        };
        let b = theoretical_bounds(Regime::CSmoothed, &p).unwrap();
        // c = 1/0.25^0.5 + 1 = 3; λ̲ = 1/(5·3); λ̄ = 5^4·3^4/(2!·0.5^{2.5})
        assert!((b.lambda_lo - 1.0 / 15.0).abs() < 1e-15);
        let hi = 625.0 * 81.0 / (2.0 * 0.5f64.powf(2.5));
        assert!((b.lambda_hi - hi).abs() < 1e-9 * hi);

        assert_eq!(
            theoretical_bounds(Regime::ScSmooth, &BoundParams::default()).unwrap_err(),
            HessianError::MissingParam("L")
        );
    }

    #[test]
    fn secant_and_inverse_on_random_memories() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &m in &[1, 2, 3, 5] {
            for _ in 0..20 {
                let n = rng.random_range(2..=12);
                let mem = random_memory(n, m, &mut rng);
                assert!(verify_secant(&mem).pass());
                let hb = mem.materialize_dense(n) * mem.materialize_inverse(n);
                assert!((hb - DMatrix::identity(n, n)).abs().max() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn two_loop_matches_dense(seed in 0u64..10_000, m in 1usize..6, n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mem = random_memory(n, m, &mut rng);
            let x = RealVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let a = mem.apply(&x);
            let d = mem.materialize_dense(n) * &x;
            prop_assert!((&a - &d).norm() <= 1e-10 * d.norm());
        }

        #[test]
        fn dense_is_symmetric_positive_definite(seed in 0u64..10_000, m in 1usize..4, n in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mem = random_memory(n, m, &mut rng);
            let h = mem.materialize_dense(n);
            prop_assert!((&h - h.transpose()).abs().max() <= 1e-12 * h.abs().max().max(1.0));
            let eig = SymmetricEigen::new(h).eigenvalues;
            prop_assert!(eig.iter().all(|e| *e > 0.0));
        }
    }
}
