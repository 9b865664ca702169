//! Verification oracles: finite differences, sparsity counts and rate fits.

use thiserror::Error;
use vssqn::oracle::RealVector;

use crate::csvlog::CsvLog;

/// Pass threshold of [`fd_check`].
pub const FD_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub checked: usize,
    /// max over points of `‖fd − g‖∞ / max(1, ‖g‖∞)`
    pub max_rel_error: f64,
    pub worst_point: Option<usize>,
}

impl FdReport {
    pub fn pass(&self) -> bool {
        self.max_rel_error <= FD_TOL
    }
}

/// Compares `grad` with central differences of `f` at every point.
///
/// Coordinate `i` is perturbed by `step·max(1, |x_i|)`.
pub fn fd_check<F, G>(f: F, grad: G, points: &[RealVector], step: f64) -> FdReport
where
    F: Fn(&RealVector) -> f64,
    G: Fn(&RealVector) -> RealVector,
{
    let mut worst = 0.0;
    let mut worst_point = None;
    for (p, x) in points.iter().enumerate() {
        let g = grad(x);
        let scale = g.amax().max(1.0);
        let mut err: f64 = 0.0;
        let mut xp = x.clone();
        for i in 0..x.len() {
            let h = step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            err = err.max((fd - g[i]).abs());
        }
        let rel = err / scale;
        if !(rel <= worst) {
            worst = rel;
            worst_point = Some(p);
        }
    }
    FdReport {
        checked: points.len(),
        max_rel_error: worst,
        worst_point,
    }
}

/// Number of entries with `|x_i| ≤ threshold`.
pub fn sparsity_count(x: &RealVector, threshold: f64) -> usize {
    x.iter().filter(|v| v.abs() <= threshold).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `log gap ≈ a + s·k`
    LinearInK,
    /// `log gap ≈ a + s·log k`
    PowerInK,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points with positive gap, got {got}")]
    TooFewPoints { need: usize, got: usize },
}

pub const MIN_FIT_POINTS: usize = 20;

/// Least-squares fit of `log gap` on `k` or `log k` over `(k, gap)` points.
///
/// Points with non-positive gap (or `k = 0` for the power model) are skipped.
pub fn fit_points(points: &[(f64, f64)], model: RateModel) -> Result<RateFit, FitError> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(k, g)| *g > 0.0 && g.is_finite() && (model == RateModel::LinearInK || *k > 0.0))
        .map(|(k, g)| {
            let x = match model {
                RateModel::LinearInK => *k,
                RateModel::PowerInK => k.ln(),
            };
            (x, g.ln())
        })
        .collect();
    if xy.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: xy.len(),
        });
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a perfectly flat series is fitted exactly
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        points: xy.len(),
    })
}

/// [`fit_points`] over the `(k, gap)` columns of a log.
pub fn rate_fit(log: &CsvLog, model: RateModel) -> Result<RateFit, FitError> {
    let pts: Vec<(f64, f64)> = log
        .rows
        .iter()
        .filter_map(|r| r.gap.map(|g| (r.k as f64, g)))
        .collect();
    fit_points(&pts, model)
}
