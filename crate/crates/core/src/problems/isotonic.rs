//! Isotonic-constrained LASSO with the monotone constraint smoothed by a
//! squared-distance penalty.
//!
//! `f(x) = (1/2p)Σ(a_iᵀx − b_i)² + λ‖x‖₁` over `x₁ ≤ … ≤ x_n`; the smoothed
//! objective adds `d_X(x)²/(2·s·η)` and Huber-smooths the ℓ1 term with η,
//! where `s` is the penalty scale.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::oracle::{check_point, OracleError, ProblemMeta, RealVector, StochasticProblem};
use crate::rng::{RngStream, SampleHandle, SampleRng};
use crate::smoothing::huber_scalar;

/// Euclidean projection onto `{x : x₁ ≤ x₂ ≤ … ≤ x_n}` by pool-adjacent-violators.
pub fn pava_project(x: &RealVector) -> RealVector {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(x.len());
    for &v in x.iter() {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(x.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    RealVector::from_vec(out)
}

/// `max_i (x_i − x_{i+1})₊`, the largest violation of `Cx ≤ 0`.
pub fn constraint_violation(x: &RealVector) -> f64 {
    (0..x.len().saturating_sub(1))
        .map(|i| (x[i] - x[i + 1]).max(0.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct IsotonicLasso {
    a: DMatrix<f64>,
    b: RealVector,
    lambda_l1: f64,
    penalty_scale: f64,
    x_planted: RealVector,
    meta: ProblemMeta,
}

/// Instance with `b = A(x₀ + σ)`, `σ ~ N(0, 0.01²)`. The first and last quarter of
/// `x₀` are ascending draws from `U[−10, 0]` and `U[0, 10]`, the middle is zero.
pub fn isotonic_make(p: usize, n: usize, lambda_l1: f64, rng: &mut RngStream) -> IsotonicLasso {
    assert!(n >= 4 && p >= 1);
    let mut r = rng.next_rng();
    let q = n / 4;
    let mut lo: Vec<f64> = (0..q).map(|_| r.random_range(-10.0..=0.0)).collect();
    let mut hi: Vec<f64> = (0..q).map(|_| r.random_range(0.0..=10.0)).collect();
    lo.sort_by(f64::total_cmp);
    hi.sort_by(f64::total_cmp);
    let mut x0 = RealVector::zeros(n);
    for i in 0..q {
        x0[i] = lo[i];
        x0[n - q + i] = hi[i];
    }
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let shifted = RealVector::from_fn(n, |i, _| x0[i] + noise.sample(&mut r));
    let a = DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut r));
    let b = &a * shifted;
    IsotonicLasso::new(a, b, lambda_l1, 1.0, x0)
}

impl IsotonicLasso {
    pub fn new(a: DMatrix<f64>, b: RealVector, lambda_l1: f64, penalty_scale: f64, x_planted: RealVector) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert!(penalty_scale > 0.0 && lambda_l1 >= 0.0);
        let n = a.ncols();
        let max_row = (0..a.nrows())
            .map(|i| a.row(i).norm_squared())
            .fold(0.0, f64::max);
        let mut meta = ProblemMeta::new(n);
        meta.lipschitz_l = Some(max_row);
        Self {
            a,
            b,
            lambda_l1,
            penalty_scale,
            x_planted,
            meta,
        }
    }

    /// Penalty weight is `1/(scale·η)`.
    pub fn with_penalty_scale(mut self, scale: f64) -> Self {
        assert!(scale > 0.0);
        self.penalty_scale = scale;
        self
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn targets(&self) -> &RealVector {
        &self.b
    }

    pub fn planted(&self) -> &RealVector {
        &self.x_planted
    }

    fn row_residual(&self, i: usize, x: &RealVector) -> f64 {
        self.a.row(i).transpose().dot(x) - self.b[i]
    }

    /// ℓ1 and constraint-penalty gradient. At η = 0 the penalty is omitted.
    fn extra_grad(&self, x: &RealVector, eta: f64, out: &mut RealVector) {
        if self.lambda_l1 > 0.0 {
            for i in 0..x.len() {
                out[i] += self.lambda_l1
                    * if eta > 0.0 {
                        huber_scalar(x[i], eta).1
                    } else if x[i] == 0.0 {
                        0.0
                    } else {
                        x[i].signum()
                    };
            }
        }
        if eta > 0.0 {
            let d = x - pava_project(x);
            out.axpy(1.0 / (self.penalty_scale * eta), &d, 1.0);
        }
    }

    fn loss(&self, x: &RealVector) -> f64 {
        let r = &self.a * x - &self.b;
        r.norm_squared() / (2.0 * self.a.nrows() as f64)
    }
}

impl StochasticProblem for IsotonicLasso {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn sample_gradient(&self, x: &RealVector, eta: f64, rng: &mut SampleRng, out: &mut RealVector) {
        let i = rng.random_range(0..self.a.nrows());
        let r = self.row_residual(i, x);
        out.copy_from(&(self.a.row(i).transpose() * r));
        self.extra_grad(x, eta, out);
    }

    fn batch_gradient(&self, x: &RealVector, eta: f64, handle: &SampleHandle) -> Result<RealVector, OracleError> {
        check_point(x, self.dim())?;
        if handle.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        let mut g = RealVector::zeros(x.len());
        for (j, mut rng) in handle.iter().enumerate() {
            let i = rng.random_range(0..self.a.nrows());
            let r = self.row_residual(i, x);
            if !r.is_finite() {
                return Err(OracleError::NonFinite { index: j as u64 });
            }
            for c in 0..x.len() {
                g[c] += r * self.a[(i, c)];
            }
        }
        g /= handle.len() as f64;
        self.extra_grad(x, eta, &mut g);
        Ok(g)
    }

    /// Unconstrained part of the objective; feasibility is reported separately.
    fn value(&self, x: &RealVector) -> Option<f64> {
        Some(self.loss(x) + self.lambda_l1 * x.lp_norm(1))
    }

    fn smoothed_value(&self, x: &RealVector, eta: f64) -> Option<f64> {
        if eta == 0.0 {
            return self.value(x);
        }
        let l1: f64 = x.iter().map(|v| huber_scalar(*v, eta).0).sum();
        let d = x - pava_project(x);
        Some(self.loss(x) + self.lambda_l1 * l1 + d.norm_squared() / (2.0 * self.penalty_scale * eta))
    }

    fn exact_gradient(&self, x: &RealVector, eta: f64) -> Option<RealVector> {
        let r = &self.a * x - &self.b;
        let mut g = self.a.tr_mul(&r) / self.a.nrows() as f64;
        self.extra_grad(x, eta, &mut g);
        Some(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> RealVector {
        RealVector::from_vec(x.to_vec())
    }

    /// Projection by enumerating all consecutive block partitions.
    fn brute_project(x: &RealVector) -> RealVector {
        let n = x.len();
        let mut best: Option<(f64, RealVector)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut out = RealVector::zeros(n);
            let mut start = 0;
            for i in 0..n {
                if i == n - 1 || mask & (1 << i) != 0 {
                    let m = x.rows(start, i + 1 - start).mean();
                    for j in start..=i {
                        out[j] = m;
                    }
                    start = i + 1;
                }
            }
            if constraint_violation(&out) > 0.0 {
                continue;
            }
            let d = (&out - x).norm_squared();
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, out));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn pava_examples() {
        let s = v(&[-1.0, 0.0, 0.0, 2.5]);
        assert_eq!(pava_project(&s), s);
        assert_eq!(pava_project(&v(&[2.0, 1.0])), v(&[1.5, 1.5]));
        assert_eq!(pava_project(&v(&[3.0, 1.0, 2.0])), v(&[2.0, 2.0, 2.0]));
        assert_eq!(brute_project(&v(&[3.0, 1.0, 2.0])), v(&[2.0, 2.0, 2.0]));
    }

    #[test]
    fn feasible_exact_fit_has_zero_gradient() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 3.0]);
        let x = v(&[-1.0, 0.5, 2.0]);
        let b = &a * &x;
        let p = IsotonicLasso::new(a, b, 0.0, 1.0, x.clone());
        let g = p.exact_gradient(&x, 0.3).unwrap();
        assert!(g.norm() < 1e-14);
        let h = RngStream::new(1, 0).take(5);
        assert!(p.batch_gradient(&x, 0.3, &h).unwrap().norm() < 1e-14);
    }

    #[test]
    fn planted_instance_shape() {
        let p = isotonic_make(50, 20, 0.1, &mut RngStream::new(4, 0));
        let x0 = p.planted();
        assert_eq!(constraint_violation(x0), 0.0);
        assert!(x0.rows(0, 5).iter().all(|v| (-10.0..=0.0).contains(v)));
        assert!(x0.rows(15, 5).iter().all(|v| (0.0..=10.0).contains(v)));
        assert!(x0.rows(5, 10).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn penalty_gradient_matches_fd() {
        let p = isotonic_make(10, 8, 0.0, &mut RngStream::new(2, 0));
        let x = v(&[0.3, -0.2, 0.9, 0.1, 0.15, -0.4, 2.0, 1.1]);
        let eta = 0.5;
        let g = p.exact_gradient(&x, eta).unwrap();
        let h = 1e-6 * (1.0 + x.norm());
        for i in 0..8 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (p.smoothed_value(&a, eta).unwrap() - p.smoothed_value(&b, eta).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn pava_matches_brute_force(x in prop::collection::vec(-3.0f64..3.0, 1..=6)) {
            let x = RealVector::from_vec(x);
            let p = pava_project(&x);
            let b = brute_project(&x);
            prop_assert!((&p - &b).amax() <= 1e-8);
        }

        #[test]
        fn pava_monotone_idempotent_nonexpansive(
            x in prop::collection::vec(-5.0f64..5.0, 1..30),
            shift in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let x = RealVector::from_vec(x);
            let y = RealVector::from_fn(x.len(), |i, _| x[i] + shift[i]);
            let px = pava_project(&x);
            prop_assert_eq!(constraint_violation(&px), 0.0);
            prop_assert!((pava_project(&px) - &px).norm() <= 1e-12);
            prop_assert!((pava_project(&y) - &px).norm() <= (&y - &x).norm() + 1e-12);
        }
    }
}
