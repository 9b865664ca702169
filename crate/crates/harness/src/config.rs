//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Later keys override earlier
//! ones. Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `label` | run name, used for output files |
//! | `problem` | `quadratic`, `logistic`, `isotonic` or `lewis_overton` |
//! | `n` | dimension |
//! | `kappa`, `convexity` (`sc`/`c`), `spread`, `noise` | quadratic ensemble |
//! | `lambda_l1` | ℓ1 weight (quadratic, logistic, isotonic) |
//! | `problem_seed` | seed for instance generation |
//! | `samples`, `density`, `support`, `mu_l2`, `l1_term` (`none`/`huber`/`sqrt`), `lambda2`, `dataset` | logistic |
//! | `penalty_scale` | isotonic constraint penalty is `1/(scale·η)` |
//! | `scheme` | `VS_SQN`, `SVS_SQN_MOREAU`, `SVS_SQN_DIMINISHING`, `RVS_SQN`, `RSVS_SQN`, `SGD`, `SQN_UNIT`, `APG_BASELINE` |
//! | `m`, `horizon`, `budget` | memory depth, iteration count, sample budget |
//! | `batch` | `geometric`, `polynomial` or `constant`; with `n0`, `rate`, `batch_exponent`, `batch_offset` |
//! | `n0`, `rate`, `batch_exponent` | also tune the scheme's default batch schedule |
//! | `step` | schedule override: `0.1`, `power:base,exp,offset` or `horizon:base,exp,K` |
//! | `gamma0` | first step, keeping the scheme's decay shape |
//! | `mu`, `eta` | schedules, same syntax as `step` |
//! | `mu0`, `epsilon`, `c_gamma`, `eps_bar`, `delta`, `delta_bar` | scheme constants |
//! | `nu1`, `nu2`, `alpha`, `lipschitz_l`, `tau` | analysis constants |
//! | `x0` | start point: one number (broadcast) or a comma list |
//! | `seed`, `repetitions` | seeds `seed .. seed+repetitions` |
//! | `log` | `sparse` or `every` |
//! | `polyak` | `true` to also report the averaged iterate |
//! | `sparsity_threshold` | default `1e-4` |

use std::path::PathBuf;
use std::str::FromStr;

use vssqn::problems::{Convexity, L1Term};
use vssqn::schedule::{BatchSchedule, ScalarSchedule};
use vssqn::solvers::{LogPolicy, Scheme, SolverConfig};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        kappa: f64,
        convexity: Convexity,
        spread: f64,
        noise: f64,
        lambda_l1: f64,
        seed: u64,
    },
    Logistic {
        dataset: Option<PathBuf>,
        samples: usize,
        n: usize,
        density: f64,
        support: f64,
        mu_l2: f64,
        lambda_l1: f64,
        l1: L1Term,
        seed: u64,
    },
    Isotonic {
        samples: usize,
        n: usize,
        lambda_l1: f64,
        penalty_scale: f64,
        seed: u64,
    },
    LewisOverton,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub label: String,
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub repetitions: u64,
    pub sparsity_threshold: f64,
}

const KEYS: &[&str] = &[
    "label", "problem", "n", "kappa", "convexity", "spread", "noise", "lambda_l1", "problem_seed",
    "samples", "density", "support", "mu_l2", "l1_term", "lambda2", "dataset", "penalty_scale",
    "scheme", "m", "horizon", "budget", "batch", "n0", "rate", "batch_exponent", "batch_offset",
    "step", "gamma0", "mu", "eta", "mu0", "epsilon", "c_gamma", "eps_bar", "delta", "delta_bar",
    "nu1", "nu2", "alpha", "lipschitz_l", "tau", "x0", "seed", "repetitions", "log", "polyak",
    "sparsity_threshold",
];

fn err(key: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Parses `key = value` lines into an ordered list; later duplicates win.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err("line", format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(k, "unknown key"));
        }
        out.retain(|(key, _)| key != k);
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

struct Table(Vec<(String, String)>);

impl Table {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| err(key, format!("cannot parse `{v}`"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn parse_scalar_schedule(key: &str, v: &str) -> Result<ScalarSchedule, HarnessError> {
    let bad = |m: &str| err(key, format!("{m} in `{v}`"));
    let nums = |s: &str| -> Result<Vec<f64>, HarnessError> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad number")))
            .collect()
    };
    let sched = if let Some(rest) = v.strip_prefix("power:") {
        let p = nums(rest)?;
        if p.len() != 3 {
            return Err(bad("expected power:base,exponent,offset"));
        }
        ScalarSchedule::power(p[0], p[1], p[2] as u64)
    } else if let Some(rest) = v.strip_prefix("horizon:") {
        let p = nums(rest)?;
        if p.len() != 3 {
            return Err(bad("expected horizon:base,exponent,K"));
        }
        ScalarSchedule::horizon_constant(p[0], p[1], p[2] as u64)
    } else {
        ScalarSchedule::constant(v.parse().map_err(|_| bad("bad number"))?)
    };
    sched.map_err(|e| err(key, e.to_string()))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(key, format!("expected true/false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let t = Table(parse_pairs(text)?);
        let label = t.raw("label").unwrap_or("run").to_string();
        if label.is_empty() || label.contains(['/', '\\']) {
            return Err(err("label", "must be a plain file name"));
        }
        let n: Option<usize> = t.get("n")?;
        let lambda_l1 = t.or("lambda_l1", 0.0)?;
        let pseed = t.or("problem_seed", 1u64)?;
        let problem = match t.raw("problem").unwrap_or("quadratic") {
            "quadratic" => ProblemSpec::Quadratic {
                n: n.unwrap_or(20),
                kappa: t.or("kappa", 100.0)?,
                convexity: match t.raw("convexity").unwrap_or("sc") {
                    "sc" => Convexity::Sc,
                    "c" => Convexity::C,
                    o => return Err(err("convexity", format!("expected sc or c, got `{o}`"))),
                },
                spread: t.or("spread", 0.5)?,
                noise: t.or("noise", 1.0)?,
                lambda_l1,
                seed: pseed,
            },
            "logistic" => ProblemSpec::Logistic {
                dataset: t.raw("dataset").map(PathBuf::from),
                samples: t.or("samples", 1000)?,
                n: n.unwrap_or(100),
                density: t.or("density", 0.1)?,
                support: t.or("support", 0.1)?,
                mu_l2: t.or("mu_l2", 0.0)?,
                lambda_l1,
                l1: match t.raw("l1_term").unwrap_or("none") {
                    "none" => L1Term::None,
                    "huber" => L1Term::Huber,
                    "sqrt" => L1Term::Sqrt {
                        lambda2: t.or("lambda2", 1e-4)?,
                    },
                    o => return Err(err("l1_term", format!("expected none, huber or sqrt, got `{o}`"))),
                },
                seed: pseed,
            },
            "isotonic" => ProblemSpec::Isotonic {
                samples: t.or("samples", 200)?,
                n: n.unwrap_or(40),
                lambda_l1,
                penalty_scale: t.or("penalty_scale", 1.0)?,
                seed: pseed,
            },
            "lewis_overton" => ProblemSpec::LewisOverton,
            o => return Err(err("problem", format!("unknown problem `{o}`"))),
        };

        let scheme: Scheme = t
            .raw("scheme")
            .ok_or_else(|| err("scheme", "missing"))?
            .parse()
            .map_err(|e: String| err("scheme", e))?;
        let mut s = SolverConfig::new(scheme);
        s.m = t.or("m", s.m)?;
        s.horizon = t.get("horizon")?;
        s.budget = t.get("budget")?;
        s.n0 = t.get("n0")?;
        s.rate = t.or("rate", s.rate)?;
        s.batch_exponent = t.get("batch_exponent")?;
        if let Some(kind) = t.raw("batch") {
            let n0 = s.n0.unwrap_or(1.0);
            let offset = t.or("batch_offset", 0u64)?;
            let b = match kind {
                "geometric" => BatchSchedule::Geometric {
                    n0,
                    rate: s.rate,
                    offset,
                },
                "polynomial" => BatchSchedule::Polynomial {
                    n0,
                    exponent: s.batch_exponent.ok_or_else(|| err("batch_exponent", "needed by batch = polynomial"))?,
                    offset,
                },
                "constant" => BatchSchedule::Constant { n0 },
                o => return Err(err("batch", format!("unknown batch schedule `{o}`"))),
            };
            s.batch = Some(b.validated().map_err(|e| err("batch", e.to_string()))?);
        }
        for (key, slot) in [("step", &mut s.step), ("mu", &mut s.mu), ("eta", &mut s.eta)] {
            if let Some(v) = t.raw(key) {
                *slot = Some(parse_scalar_schedule(key, v)?);
            }
        }
        s.gamma0 = t.get("gamma0")?;
        s.mu0 = t.or("mu0", s.mu0)?;
        s.epsilon = t.or("epsilon", s.epsilon)?;
        s.c_gamma = t.or("c_gamma", s.c_gamma)?;
        s.eps_bar = t.get("eps_bar")?;
        s.delta = t.get("delta")?;
        s.delta_bar = t.get("delta_bar")?;
        s.nu1 = t.get("nu1")?;
        s.nu2 = t.get("nu2")?;
        s.alpha = t.get("alpha")?;
        s.lipschitz_l = t.get("lipschitz_l")?;
        s.tau = t.get("tau")?;
        s.seed = t.or("seed", 0u64)?;
        if let Some(v) = t.raw("x0") {
            let vals: Vec<f64> = v
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err("x0", format!("cannot parse `{v}`")))?;
            s.x0 = Some(vals);
        }
        s.log = match t.raw("log").unwrap_or("sparse") {
            "sparse" => LogPolicy::Sparse,
            "every" => LogPolicy::Every,
            o => return Err(err("log", format!("expected sparse or every, got `{o}`"))),
        };
        if let Some(v) = t.raw("polyak") {
            s.polyak = parse_bool("polyak", v)?;
        }
        let repetitions = t.or("repetitions", 1u64)?;
        if repetitions == 0 {
            return Err(err("repetitions", "must be at least 1"));
        }
        Ok(Self {
            label,
            problem,
            solver: s,
            repetitions,
            sparsity_threshold: t.or("sparsity_threshold", 1e-4)?,
        })
    }

    /// Dimension of the problem, when known before building it.
    pub fn dim(&self) -> Option<usize> {
        match &self.problem {
            ProblemSpec::Quadratic { n, .. } | ProblemSpec::Isotonic { n, .. } => Some(*n),
            ProblemSpec::Logistic { dataset: None, n, .. } => Some(*n),
            ProblemSpec::Logistic { .. } => None,
            ProblemSpec::LewisOverton => Some(2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::parse("scheme = VS_SQN\nbudget = 100 # comment\n").unwrap();
        assert_eq!(c.solver.scheme, Scheme::VsSqn);
        assert_eq!(c.solver.budget, Some(100));
        assert!(matches!(c.problem, ProblemSpec::Quadratic { n: 20, .. }));
    }

    #[test]
    fn invalid_scheme_names_field() {
        let e = ExperimentConfig::parse("scheme = NEWTON\n").unwrap_err();
        assert!(matches!(&e, HarnessError::Config { key, .. } if key == "scheme"));
        assert!(e.to_string().contains("scheme"));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = ExperimentConfig::parse("scheme = SGD\nstepsize = 3\n").unwrap_err();
        assert!(matches!(&e, HarnessError::Config { key, .. } if key == "stepsize"));
    }

    #[test]
    fn later_keys_override() {
        let c = ExperimentConfig::parse("scheme = SGD\nm = 2\nm = 5\nhorizon = 3").unwrap();
        assert_eq!(c.solver.m, 5);
    }

    #[test]
    fn schedules_and_batches() {
        let c = ExperimentConfig::parse(
            "scheme = RVS_SQN\nhorizon = 9\nstep = power:0.5,-0.1,0\nmu = power:1,-0.9,0\n\
             batch = polynomial\nn0 = 2\nbatch_exponent = 2.1\neta = 0.3\nx0 = 1, 2\n",
        )
        .unwrap();
        assert_eq!(c.solver.step, Some(ScalarSchedule::Power { base: 0.5, exponent: -0.1, offset: 0 }));
        assert_eq!(c.solver.batch, Some(BatchSchedule::Polynomial { n0: 2.0, exponent: 2.1, offset: 0 }));
        assert_eq!(c.solver.eta, Some(ScalarSchedule::Constant { value: 0.3 }));
        assert_eq!(c.solver.x0, Some(vec![1.0, 2.0]));
        assert!(ExperimentConfig::parse("scheme = SGD\nstep = power:1,2").is_err());
        assert!(ExperimentConfig::parse("scheme = SGD\nbatch = polynomial").is_err());
    }
}
