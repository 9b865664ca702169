//! Solver configuration and its resolution into concrete schedules.

use crate::hessian::{theoretical_bounds, BoundParams, HessianBounds, PairMode, Regime};
use crate::oracle::{RealVector, StochasticProblem};
use crate::rng::RngStream;
use crate::schedule::{BatchSchedule, ScalarSchedule};
use crate::smoothing::{moreau_eta_cap, ProxSpec};

use super::{Scheme, SolverError};

/// Which iterates are logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogPolicy {
    /// Every iterate up to 10⁴, then a thinning cadence; the last iterate always.
    #[default]
    Sparse,
    Every,
}

impl LogPolicy {
    pub(crate) fn wants(&self, k: u64) -> bool {
        match self {
            LogPolicy::Every => true,
            LogPolicy::Sparse => {
                if k < 10_000 {
                    return true;
                }
                let step = 10u64.pow((k as f64).log10().floor() as u32 - 3);
                k % step == 0
            }
        }
    }
}

/// Run configuration. `None` fields take the scheme's theoretical default.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// L-BFGS memory depth
    pub m: usize,
    pub horizon: Option<u64>,
    /// total realizations allowed
    pub budget: Option<u64>,
    pub batch: Option<BatchSchedule>,
    /// full step schedule override
    pub step: Option<ScalarSchedule>,
    /// base of the scheme's own step schedule (keeps its decay shape)
    pub gamma0: Option<f64>,
    pub mu: Option<ScalarSchedule>,
    pub mu0: f64,
    pub eta: Option<ScalarSchedule>,
    pub epsilon: f64,
    pub c_gamma: f64,
    /// defaults to 5ε/3
    pub eps_bar: Option<f64>,
    /// exponent `a` of polynomial batch schedules
    pub batch_exponent: Option<f64>,
    pub n0: Option<f64>,
    /// ρ (or q) of geometric batch schedules
    pub rate: f64,
    pub delta: Option<f64>,
    pub delta_bar: Option<f64>,
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    pub alpha: Option<f64>,
    pub lipschitz_l: Option<f64>,
    pub tau: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub log: LogPolicy,
    /// keep per-iteration replay data
    pub trace: bool,
    pub prox: ProxSpec,
    /// also report the running average of iterates
    pub polyak: bool,
}

impl SolverConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            m: 1,
            horizon: None,
            budget: None,
            batch: None,
            step: None,
            gamma0: None,
            mu: None,
            mu0: 1.0,
            eta: None,
            epsilon: 0.1,
            c_gamma: 1.0,
            eps_bar: None,
            batch_exponent: None,
            n0: None,
            rate: 0.95,
            delta: None,
            delta_bar: None,
            nu1: None,
            nu2: None,
            alpha: None,
            lipschitz_l: None,
            tau: None,
            x0: None,
            seed: 0,
            stream: 0,
            log: LogPolicy::Sparse,
            trace: false,
            prox: ProxSpec::default(),
            polyak: false,
        }
    }
}

/// Averaging constants of rsVS-SQN: `w_k = λ̲μγ − C/N_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AveragePlan {
    pub lambda_lo: f64,
    pub mu: f64,
    pub gamma: f64,
    pub c: f64,
}

impl AveragePlan {
    pub fn weight(&self, n_k: u64) -> f64 {
        self.lambda_lo * self.mu * self.gamma - self.c / n_k as f64
    }
}

/// Fully resolved schedules for one run.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub scheme: Scheme,
    pub m: usize,
    pub k0: u64,
    pub batch: BatchSchedule,
    pub step: ScalarSchedule,
    pub theoretical_step: Option<f64>,
    /// regularization `μ_k`; the center is `x0`
    pub mu: Option<ScalarSchedule>,
    /// smoothing `η_k` passed to the oracle
    pub eta: Option<ScalarSchedule>,
    /// `None` means no quasi-Newton preconditioning
    pub pair_mode: Option<PairMode>,
    /// hold μ, η at odd k and decrease them at even k
    pub alternate: bool,
    /// pairs are formed with `η^pair_eta_power`
    pub pair_eta_power: f64,
    pub delta: f64,
    pub delta_bar: f64,
    pub moreau_eta: Option<f64>,
    pub horizon: Option<u64>,
    pub budget: Option<u64>,
    pub average: Option<AveragePlan>,
    pub polyak: bool,
    pub x0: RealVector,
    pub nu2: f64,
}

fn positive(field: &'static str, v: f64) -> Result<f64, SolverError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(SolverError::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn need(v: Option<f64>, scheme: Scheme, name: &'static str) -> Result<f64, SolverError> {
    v.ok_or(SolverError::MissingConstant { scheme, name })
}

/// `ν₂² ≈ mean ‖g_j − ḡ‖²` from 100 draws at `x0` on a side stream.
fn pilot_nu2<P: StochasticProblem + ?Sized>(problem: &P, x0: &RealVector, cfg: &SolverConfig) -> f64 {
    const PILOT: usize = 100;
    let mut stream = RngStream::new(cfg.seed, cfg.stream ^ 0x9e37_79b9_7f4a_7c15);
    let n = x0.len();
    let mut draws = Vec::with_capacity(PILOT);
    let mut g = RealVector::zeros(n);
    for _ in 0..PILOT {
        let mut rng = stream.next_rng();
        problem.sample_gradient(x0, 0.0, &mut rng, &mut g);
        if g.iter().all(|v| v.is_finite()) {
            draws.push(g.clone());
        }
    }
    if draws.len() < 2 {
        return 0.0;
    }
    let mut mean = RealVector::zeros(n);
    for d in &draws {
        mean += d;
    }
    mean /= draws.len() as f64;
    let var: f64 = draws.iter().map(|d| (d - &mean).norm_squared()).sum::<f64>() / (draws.len() - 1) as f64;
    var.sqrt()
}

fn bounds(regime: Regime, p: BoundParams) -> Result<HessianBounds, SolverError> {
    Ok(theoretical_bounds(regime, &p)?)
}

impl Plan {
    pub fn resolve<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<Self, SolverError> {
        let scheme = cfg.scheme;
        let meta = problem.meta();
        let n = problem.dim();
        if cfg.m == 0 {
            return Err(SolverError::config("m", "memory depth must be at least 1"));
        }
        if cfg.horizon.is_none() && cfg.budget.is_none() {
            return Err(SolverError::config("horizon", "set a horizon K or a sample budget"));
        }
        if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
            return Err(SolverError::config("epsilon", "must lie in (0, 1)"));
        }
        if !(cfg.rate > 0.0 && cfg.rate < 1.0) {
            return Err(SolverError::config("rate", "must lie in (0, 1)"));
        }
        positive("mu0", cfg.mu0)?;
        positive("c_gamma", cfg.c_gamma)?;
        if let Some(g) = cfg.gamma0 {
            positive("gamma0", g)?;
        }
        if let Some(n0) = cfg.n0 {
            if !(n0 >= 1.0 && n0.is_finite()) {
                return Err(SolverError::config("n0", format!("must be at least 1, got {n0}")));
            }
        }
        let x0 = match &cfg.x0 {
            Some(v) if v.len() != n => {
                return Err(SolverError::config("x0", format!("expected {n} entries, got {}", v.len())))
            }
            Some(v) => RealVector::from_vec(v.clone()),
            None => RealVector::zeros(n),
        };
        let l = cfg.lipschitz_l.or(meta.lipschitz_l);
        let tau = cfg.tau.or(meta.tau);
        let nu1 = cfg.nu1.or(meta.nu1).unwrap_or(0.0);
        let alpha = cfg.alpha.or(meta.alpha_growth).or(tau).unwrap_or(1.0);
        let nu2 = match cfg.nu2.or(meta.nu2) {
            Some(v) => v,
            None => pilot_nu2(problem, &x0, cfg),
        };
        let overridden = cfg.step.is_some() || cfg.gamma0.is_some();
        let eps = cfg.epsilon;
        let nm = (n + cfg.m) as f64;

        let mut plan = Plan {
            scheme,
            m: cfg.m,
            k0: scheme.first_k(),
            batch: BatchSchedule::Constant { n0: 1.0 },
            step: ScalarSchedule::Constant { value: 1.0 },
            theoretical_step: None,
            mu: None,
            eta: cfg.eta,
            pair_mode: None,
            alternate: false,
            pair_eta_power: 1.0,
            delta: cfg.delta.unwrap_or(0.0),
            delta_bar: cfg.delta_bar.unwrap_or(0.0),
            moreau_eta: None,
            horizon: cfg.horizon,
            budget: cfg.budget,
            average: None,
            polyak: cfg.polyak,
            x0,
            nu2,
        };
        let n0 = cfg.n0.unwrap_or(1.0);
        // step schedule with the scheme's shape and a given base
        let shaped = |base: f64, exponent: f64, offset: u64| -> Result<ScalarSchedule, SolverError> {
            Ok(if exponent == 0.0 {
                ScalarSchedule::constant(base)?
            } else {
                ScalarSchedule::power(base, exponent, offset)?
            })
        };

        match scheme {
            Scheme::VsSqn => {
                plan.pair_mode = Some(PairMode::Sc);
                let b = match (l, tau) {
                    (Some(l), Some(t)) => Some(bounds(
                        Regime::ScSmooth,
                        BoundParams {
                            m: cfg.m,
                            n,
                            lipschitz_l: Some(l),
                            tau: Some(t),
                            ..Default::default()
                        },
                    )?),
                    _ => None,
                };
                plan.theoretical_step = match (b, l) {
                    (Some(b), Some(l)) => Some(1.0 / (l * b.lambda_hi)),
                    _ => None,
                };
                let base = match (cfg.gamma0, plan.theoretical_step) {
                    (Some(g), _) => g,
                    (None, Some(g)) => g,
                    (None, None) if cfg.step.is_none() => {
                        return Err(SolverError::MissingConstant {
                            scheme,
                            name: if l.is_none() { "L" } else { "tau" },
                        })
                    }
                    _ => 1.0,
                };
                plan.step = shaped(base, 0.0, 0)?;
                let mut n0 = n0;
                if cfg.n0.is_none() && nu1 > 0.0 {
                    if let (Some(b), Some(t)) = (b, tau) {
                        let need = (2.0 * nu1 * nu1 * b.lambda_hi / (t * t * b.lambda_lo)).ceil();
                        if !need.is_finite() {
                            return Err(SolverError::config("n0", "the default N0 bound overflows; set n0"));
                        }
                        n0 = need.max(1.0);
                    }
                }
                plan.batch = BatchSchedule::geometric(n0, cfg.rate)?;
            }
            Scheme::SvsSqnMoreau => {
                plan.pair_mode = Some(PairMode::Sc);
                let tau_v = tau;
                let cap = match (l, tau_v) {
                    (Some(l), Some(t)) => Some(moreau_eta_cap(n, l, t)),
                    (None, Some(t)) => {
                        let n1 = n as f64 + 1.0;
                        Some((4.0 * n1 * n1 / (t * t)).cbrt())
                    }
                    _ => None,
                };
                let eta = match cfg.eta {
                    Some(ScalarSchedule::Constant { value }) => value,
                    Some(ScalarSchedule::HorizonConstant { .. }) => cfg.eta.unwrap().eval(0)?,
                    Some(_) => {
                        return Err(SolverError::config("eta", "the Moreau scheme uses a constant eta"))
                    }
                    None => need(cap, scheme, "tau")?,
                };
                positive("eta", eta)?;
                if let Some(cap) = cap {
                    if eta > cap * (1.0 + 1e-12) {
                        return Err(SolverError::EtaCap { eta, cap });
                    }
                }
                plan.moreau_eta = Some(eta);
                plan.eta = None;
                plan.theoretical_step = tau.map(|t| t * eta * eta / (4.0 * (1.0 + n as f64)));
                let base = match cfg.gamma0.or(plan.theoretical_step) {
                    Some(g) => g,
                    None if overridden => 1.0,
                    None => return Err(SolverError::MissingConstant { scheme, name: "tau" }),
                };
                plan.step = shaped(base, 0.0, 0)?;
                plan.batch = BatchSchedule::geometric(n0, cfg.rate)?;
            }
            Scheme::SvsSqnDiminishing => {
                plan.pair_mode = Some(PairMode::Sc);
                plan.alternate = true;
                let n1 = n as f64 + 1.0;
                let eta_base = tau.map(|t| (2.0 * n1 * n1 / (t * t)).cbrt());
                plan.eta = match cfg.eta {
                    Some(s) => Some(s),
                    None => Some(ScalarSchedule::power(need(eta_base, scheme, "tau")?, -1.0 / 3.0, 2)?),
                };
                plan.theoretical_step = match (tau, eta_base) {
                    (Some(t), Some(e)) => Some(t * e * e / n1 * 2f64.powf(-2.0 / 3.0)),
                    _ => None,
                };
                let base = match (cfg.gamma0, tau, eta_base) {
                    (Some(g), _, _) => g * 2f64.powf(2.0 / 3.0),
                    (None, Some(t), Some(e)) => t * e * e / n1,
                    _ if overridden => 1.0,
                    _ => return Err(SolverError::MissingConstant { scheme, name: "tau" }),
                };
                plan.step = ScalarSchedule::power(base, -2.0 / 3.0, 2)?;
                let a = cfg.batch_exponent.unwrap_or(1.1);
                if !(a > 1.0) {
                    return Err(SolverError::config("batch_exponent", "a must exceed 1"));
                }
                let mut n0 = n0;
                if cfg.n0.is_none() && nu1 > 0.0 {
                    let t = need(tau, scheme, "tau")?;
                    n0 = (2f64.powf(4.0 / 3.0) * nu1 * nu1 * n1.cbrt() / t.powf(5.0 / 3.0))
                        .ceil()
                        .max(1.0);
                }
                plan.batch = BatchSchedule::polynomial(n0, a + 2.0 / 3.0, 2)?;
            }
            Scheme::RvsSqn => {
                plan.pair_mode = Some(PairMode::C);
                plan.alternate = true;
                let (a, b, c) = (2.0 + eps, eps, 1.0 - 2.0 * eps / 3.0);
                let a = cfg.batch_exponent.unwrap_or(a);
                plan.delta_bar = cfg.delta_bar.unwrap_or(eps / (2.0 * nm));
                plan.mu = Some(match cfg.mu {
                    Some(s) => s,
                    None => ScalarSchedule::power(cfg.mu0, -c, 0)?,
                });
                let mu0 = plan.mu.unwrap().eval(plan.k0)?;
                let lam = match l {
                    Some(l) => Some(bounds(
                        Regime::CSmooth,
                        BoundParams {
                            m: cfg.m,
                            n,
                            lipschitz_l: Some(l),
                            mu_k: Some(mu0),
                            mu0: Some(mu0),
                            delta_bar: Some(plan.delta_bar),
                            ..Default::default()
                        },
                    )?),
                    None => None,
                };
                plan.theoretical_step = match (lam, l) {
                    (Some(bd), Some(l)) => Some(bd.lambda_lo / (bd.lambda_hi * bd.lambda_hi * (l + mu0))),
                    _ => None,
                };
                let base = match cfg.gamma0.or(plan.theoretical_step) {
                    Some(g) => g,
                    None if overridden => 1.0,
                    None => return Err(SolverError::MissingConstant { scheme, name: "L" }),
                };
                plan.step = shaped(base, -b, 0)?;
                let mut n0 = n0;
                if cfg.n0.is_none() && nu1 > 0.0 {
                    if let (Some(bd), Some(l)) = (lam, l) {
                        // λ here is the μ-free factor of λ̄_k, i.e. λ̄_1 at μ₁ = μ₀
                        let lam_c = bd.lambda_hi * mu0.powf(plan.delta_bar * nm);
                        let v = (l + mu0) * lam_c * lam_c * nu1 * nu1 * base / (alpha * bd.lambda_lo * mu0);
                        if v.is_finite() {
                            n0 = v.ceil().max(1.0);
                        }
                    }
                }
                plan.batch = BatchSchedule::polynomial(n0, a, 0)?;
            }
            Scheme::RsvsSqn => {
                let k = cfg
                    .horizon
                    .ok_or_else(|| SolverError::config("horizon", "RSVS_SQN needs the horizon K up front"))?;
                plan.pair_mode = Some(PairMode::C);
                if n + cfg.m < 2 {
                    return Err(SolverError::config("m", "n + m must be at least 2"));
                }
                plan.delta = cfg.delta.unwrap_or(eps / (nm - 1.0));
                plan.delta_bar = cfg.delta_bar.unwrap_or(eps / nm);
                plan.pair_eta_power = plan.delta;
                let mu_s = match cfg.mu {
                    Some(s) => s,
                    None => ScalarSchedule::horizon_constant(1.0, -1.0 / 3.0, k)?,
                };
                let eta_s = match cfg.eta {
                    Some(s) => s,
                    None => ScalarSchedule::horizon_constant(1.0, -1.0 / 3.0, k)?,
                };
                for (f, s) in [("mu", mu_s), ("eta", eta_s)] {
                    if matches!(s, ScalarSchedule::Power { .. }) {
                        return Err(SolverError::config(f, "RSVS_SQN keeps mu and eta constant"));
                    }
                }
                let (mu, eta) = (mu_s.eval(0)?, eta_s.eval(0)?);
                plan.mu = Some(mu_s);
                plan.eta = Some(eta_s);
                let eps_bar = cfg.eps_bar.unwrap_or(5.0 * eps / 3.0);
                let theo = cfg.c_gamma * (k as f64).powf(-1.0 / 3.0 + eps_bar);
                plan.theoretical_step = Some(theo);
                let gamma = cfg.gamma0.unwrap_or(theo);
                plan.step = match cfg.step {
                    Some(ScalarSchedule::Power { .. }) => {
                        return Err(SolverError::config("step", "RSVS_SQN uses a constant step"))
                    }
                    Some(s) => s,
                    None => ScalarSchedule::constant(gamma)?,
                };
                let gamma = plan.step.eval(0)?;
                let bd = bounds(
                    Regime::CSmoothed,
                    BoundParams {
                        m: cfg.m,
                        n,
                        mu_k: Some(mu),
                        eta_k: Some(eta),
                        mu0: Some(mu),
                        delta: Some(plan.delta),
                        delta_bar: Some(plan.delta_bar),
                        ..Default::default()
                    },
                )?;
                let c = if nu1 == 0.0 {
                    0.0
                } else {
                    2.0 * (1.0 + mu * eta) * bd.lambda_hi * bd.lambda_hi * nu1 * nu1 * gamma * gamma / (alpha * eta)
                };
                let a = cfg.batch_exponent.unwrap_or(1.1);
                if !(a > 1.0) {
                    return Err(SolverError::config("batch_exponent", "a must exceed 1"));
                }
                plan.batch = match cfg.batch {
                    Some(b) => b,
                    None => BatchSchedule::polynomial(n0, a, 1)?,
                };
                let bound = c / (bd.lambda_lo * mu * gamma);
                let n0_eff = plan.batch.n0();
                if c > 0.0 && !(n0_eff > bound) {
                    return Err(SolverError::BatchBound { n0: n0_eff, bound });
                }
                plan.average = Some(AveragePlan {
                    lambda_lo: bd.lambda_lo,
                    mu,
                    gamma,
                    c,
                });
            }
            Scheme::Sgd => {
                let base = match (cfg.gamma0, l) {
                    (Some(g), _) => g,
                    (None, Some(l)) => 1.0 / l,
                    _ if overridden => 1.0,
                    _ => return Err(SolverError::MissingConstant { scheme, name: "L" }),
                };
                plan.theoretical_step = l.map(|l| 1.0 / l);
                plan.step = shaped(base, -0.5, 0)?;
                plan.batch = BatchSchedule::constant(n0)?;
            }
            Scheme::SqnUnit => {
                plan.pair_mode = Some(PairMode::Sc);
                plan.theoretical_step = match (l, tau) {
                    (Some(l), Some(t)) => {
                        let b = bounds(
                            Regime::ScSmooth,
                            BoundParams {
                                m: cfg.m,
                                n,
                                lipschitz_l: Some(l),
                                tau: Some(t),
                                ..Default::default()
                            },
                        )?;
                        // any γ > 1/(Lλ̄) qualifies; take twice the threshold
                        Some(2.0 / (l * b.lambda_hi))
                    }
                    _ => None,
                };
                let base = match cfg.gamma0.or(plan.theoretical_step) {
                    Some(g) => g,
                    None if overridden => 1.0,
                    None => return Err(SolverError::MissingConstant { scheme, name: "L" }),
                };
                plan.step = shaped(base, -1.0, 0)?;
                plan.batch = BatchSchedule::constant(1.0)?;
            }
            Scheme::ApgBaseline => {
                plan.theoretical_step = l.map(|l| 1.0 / l);
                let base = match cfg.gamma0.or(plan.theoretical_step) {
                    Some(g) => g,
                    None if overridden => 1.0,
                    None => return Err(SolverError::MissingConstant { scheme, name: "L" }),
                };
                plan.step = shaped(base, 0.0, 0)?;
                plan.batch = BatchSchedule::geometric(n0, cfg.rate)?;
            }
        }

        if scheme != Scheme::RsvsSqn {
            if let Some(s) = cfg.step {
                plan.step = s;
            }
            if let Some(b) = cfg.batch {
                plan.batch = b;
            }
        }
        if plan.alternate {
            for (name, s) in [("mu", plan.mu), ("eta", plan.eta)] {
                if let Some(s) = s {
                    if !s.is_non_increasing() || matches!(s, ScalarSchedule::Constant { .. } | ScalarSchedule::HorizonConstant { .. }) {
                        return Err(SolverError::config(
                            name,
                            "alternating schemes need a strictly decreasing schedule",
                        ));
                    }
                }
            }
        }
        // make sure the first step is defined
        plan.step.eval(plan.k0)?;
        Ok(plan)
    }
}
