//! High-accuracy deterministic solvers used to compute reference optima.

use crate::oracle::RealVector;
use crate::smoothing::CompositeModel;

/// Outcome of a reference solve.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: RealVector,
    pub value: f64,
    /// final gradient-mapping norm
    pub residual: f64,
    pub iters: usize,
}

/// Accelerated proximal gradient with function-value restarts on `g + h`.
///
/// Stops when the gradient mapping at step `1/L` falls below `tol`.
pub fn fista<M: CompositeModel + ?Sized>(
    model: &M,
    x0: &RealVector,
    tol: f64,
    max_iters: usize,
) -> ReferenceSolution {
    let l = model.smooth_lipschitz().max(f64::MIN_POSITIVE);
    let t = 1.0 / l;
    let obj = |u: &RealVector| model.smooth_value(u) + model.h_value(u);
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut theta = 1.0f64;
    let mut fx = obj(&x);
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    let mut restarted = false;
    for it in 1..=max_iters {
        iters = it;
        let g = model.smooth_grad(&y);
        let next = model.prox_h(&(&y - g * t), t);
        residual = (&y - &next).norm() / t;
        let fnext = obj(&next);
        if fnext > fx && !restarted {
            // restart momentum; a plain step from x is accepted unconditionally
            theta = 1.0;
            y = x.clone();
            restarted = true;
            continue;
        }
        restarted = false;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &next + (&next - &x) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        x = next;
        fx = fnext;
        if residual <= tol {
            break;
        }
    }
    ReferenceSolution {
        x,
        value: fx,
        residual,
        iters,
    }
}
