//! `f(x) = ½‖x‖² + max{2|x₁| + x₂, 3x₂}`, minimized at `(0, −1)` with value `−½`.
//!
//! The max is rewritten over three affine forms `2x₁+x₂`, `−2x₁+x₂`, `3x₂` and
//! smoothed by log-sum-exp.

use crate::oracle::{ProblemMeta, RealVector, StochasticProblem};
use crate::rng::SampleRng;
use crate::smoothing::{affine_max, lse_smooth_max, AffineForm};

fn terms() -> [AffineForm; 3] {
    [
        AffineForm::new(vec![2.0, 1.0], 0.0),
        AffineForm::new(vec![-2.0, 1.0], 0.0),
        AffineForm::new(vec![0.0, 3.0], 0.0),
    ]
}

/// Value and gradient; `eta = 0` gives the exact value and one subgradient.
pub fn lewis_overton_oracle(x: &RealVector, eta: f64) -> (f64, RealVector) {
    let t = terms();
    let (m, g) = if eta > 0.0 {
        lse_smooth_max(&t, x, eta).expect("three terms, positive eta")
    } else {
        affine_max(&t, x)
    };
    (0.5 * x.norm_squared() + m, x + g)
}

#[derive(Debug, Clone)]
pub struct LewisOverton {
    meta: ProblemMeta,
}

impl Default for LewisOverton {
    fn default() -> Self {
        let mut meta = ProblemMeta::new(2);
        meta.tau = Some(1.0);
        meta.alpha_growth = Some(1.0);
        meta.f_star = Some(-0.5);
        meta.x_star = Some(vec![0.0, -1.0]);
        Self { meta }
    }
}

impl LewisOverton {
    /// Gradient Lipschitz constant of the smoothed function: `1 + 9/η`.
    pub fn smoothed_lipschitz(eta: f64) -> f64 {
        1.0 + 9.0 / eta
    }
}

impl StochasticProblem for LewisOverton {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn sample_gradient(&self, x: &RealVector, eta: f64, _rng: &mut SampleRng, out: &mut RealVector) {
        out.copy_from(&lewis_overton_oracle(x, eta).1);
    }

    fn value(&self, x: &RealVector) -> Option<f64> {
        Some(lewis_overton_oracle(x, 0.0).0)
    }

    fn smoothed_value(&self, x: &RealVector, eta: f64) -> Option<f64> {
        Some(lewis_overton_oracle(x, eta).0)
    }

    fn exact_gradient(&self, x: &RealVector, eta: f64) -> Option<RealVector> {
        Some(lewis_overton_oracle(x, eta).1)
    }
}
