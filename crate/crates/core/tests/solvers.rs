use proptest::prelude::*;
use rand::Rng;
use vssqn::oracle::{ProblemMeta, RealVector, StochasticProblem};
use vssqn::problems::{quad_make, Convexity, QuadraticEnsemble};
use vssqn::regularization::{reg_value_grad, RegularizedView};
use vssqn::rng::{RngStream, SampleHandle, SampleRng};
use vssqn::schedule::BatchSchedule;
use vssqn::smoothing::{prox_inner, prox_soft_threshold, CompositeModel, ProxSpec};
use vssqn::solvers::{run, LogPolicy, RunResult, Scheme, SolverConfig, Termination};

fn quad(seed: u64, n: usize, kappa: f64, c: Convexity) -> QuadraticEnsemble {
    quad_make(n, kappa, c, &mut RngStream::new(seed, 0))
}

fn replay<P: StochasticProblem>(p: &P, r: &RunResult, x0: &RealVector) {
    assert!(!r.trace.is_empty());
    for t in &r.trace {
        let eta = t.eta.unwrap_or(0.0);
        let mut g = if r.scheme == Scheme::SvsSqnMoreau {
            let model = p.batch_model(&t.handle).unwrap();
            let u = prox_inner(model.as_ref(), &t.x, eta, &ProxSpec::default()).unwrap().u;
            (&t.x - u) / eta
        } else {
            p.batch_gradient(&t.x, eta, &t.handle).unwrap()
        };
        if let Some(mu) = t.mu {
            g = reg_value_grad(&RegularizedView::new(mu, x0.clone()).unwrap(), &t.x, &g, None).1;
        }
        let d = t.memory.apply(&g);
        let x_next = &t.x - d * t.gamma;
        assert_eq!(x_next, t.x_next, "{} k={}", r.scheme, t.k);
    }
    if r.scheme != Scheme::ApgBaseline {
        for w in r.trace.windows(2) {
            assert_eq!(w[0].x_next, w[1].x);
        }
    }
}

#[test]
fn update_fidelity_all_schemes() {
    let sc = quad(1, 6, 20.0, Convexity::Sc);
    let sc_l1 = quad(2, 6, 20.0, Convexity::Sc).with_l1(0.1);
    let c = quad(3, 6, 20.0, Convexity::C);
    let c_l1 = quad(4, 6, 20.0, Convexity::C).with_l1(0.1);
    for scheme in Scheme::ALL {
        let mut cfg = SolverConfig::new(scheme);
        cfg.horizon = Some(12);
        cfg.trace = true;
        cfg.m = 2;
        cfg.seed = 11;
        cfg.x0 = Some(vec![0.5; 6]);
        let x0 = RealVector::from_element(6, 0.5);
        let p: &QuadraticEnsemble = match scheme {
            Scheme::VsSqn | Scheme::Sgd | Scheme::SqnUnit | Scheme::ApgBaseline => {
                cfg.gamma0 = Some(0.02);
                &sc
            }
            Scheme::SvsSqnMoreau | Scheme::SvsSqnDiminishing => &sc_l1,
            Scheme::RvsSqn => {
                cfg.gamma0 = Some(0.02);
                &c
            }
            Scheme::RsvsSqn => &c_l1,
        };
        if scheme == Scheme::ApgBaseline {
            cfg.batch = Some(BatchSchedule::constant(3.0).unwrap());
        }
        let r = run(p, &cfg).unwrap();
        assert_eq!(r.trace.len(), 12, "{scheme}");
        replay(p, &r, &x0);
        assert_eq!(r.x_averaged.is_some(), scheme == Scheme::RsvsSqn);
    }
}

#[test]
fn deterministic_replay_of_whole_runs() {
    let p = quad(5, 8, 30.0, Convexity::Sc);
    let mut cfg = SolverConfig::new(Scheme::VsSqn);
    cfg.budget = Some(20_000);
    cfg.gamma0 = Some(0.03);
    cfg.seed = 99;
    let a = run(&p, &cfg).unwrap();
    let b = run(&p, &cfg).unwrap();
    assert_eq!(a.x_final, b.x_final);
    let strip = |r: &RunResult| {
        r.records
            .iter()
            .map(|x| (x.k, x.samples_cum, x.grad_evals_cum, x.fval.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    cfg.seed = 100;
    assert_ne!(run(&p, &cfg).unwrap().x_final, a.x_final);
}

/// `F(x, ω) = ½x² + |x| + ξx`, `|ξ| ≤ ½`; every sampled problem is minimized at 0.
struct ScalarAbs {
    meta: ProblemMeta,
}

struct ScalarAbsModel {
    xi_bar: f64,
}

fn xi(rng: &mut SampleRng) -> f64 {
    rng.random::<f64>() - 0.5
}

impl StochasticProblem for ScalarAbs {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }
    fn sample_gradient(&self, x: &RealVector, _eta: f64, rng: &mut SampleRng, out: &mut RealVector) {
        out[0] = x[0] + x[0].signum() + xi(rng);
    }
    fn value(&self, x: &RealVector) -> Option<f64> {
        Some(0.5 * x[0] * x[0] + x[0].abs())
    }
    fn batch_model(&self, handle: &SampleHandle) -> Option<Box<dyn CompositeModel + '_>> {
        let s: f64 = handle.iter().map(|mut r| xi(&mut r)).sum();
        Some(Box::new(ScalarAbsModel {
            xi_bar: s / handle.len() as f64,
        }))
    }
}

impl CompositeModel for ScalarAbsModel {
    fn dim(&self) -> usize {
        1
    }
    fn smooth_value(&self, u: &RealVector) -> f64 {
        0.5 * u[0] * u[0] + self.xi_bar * u[0]
    }
    fn smooth_grad(&self, u: &RealVector) -> RealVector {
        RealVector::from_element(1, u[0] + self.xi_bar)
    }
    fn smooth_lipschitz(&self) -> f64 {
        1.0
    }
    fn h_value(&self, u: &RealVector) -> f64 {
        u[0].abs()
    }
    fn prox_h(&self, v: &RealVector, t: f64) -> RealVector {
        prox_soft_threshold(v, t)
    }
}

#[test]
fn moreau_scalar_abs_reaches_zero() {
    let mut meta = ProblemMeta::new(1);
    meta.tau = Some(1.0);
    meta.lipschitz_l = Some(1.0);
    meta.f_star = Some(0.0);
    meta.nu2 = Some(0.3);
    let p = ScalarAbs { meta };
    let mut cfg = SolverConfig::new(Scheme::SvsSqnMoreau);
    cfg.x0 = Some(vec![3.0]);
    cfg.budget = Some(200_000);
    cfg.rate = 0.9;
    let r = run(&p, &cfg).unwrap();
    assert!(r.x_final[0].abs() <= 1e-6, "{}", r.x_final[0]);
    // default step τη²/(4(1+n)) with η at the cap min{2/L, (4(n+1)²/τ²)^{1/3}} = 2
    assert!((r.step0 - 4.0 / 8.0).abs() < 1e-15);
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn sqn_unit_gap_decays_like_one_over_k() {
    let p = quad(7, 5, 4.0, Convexity::Sc);
    let seeds = 40;
    let horizon = 20_000u64;
    let checkpoints: Vec<u64> = (0..=20).map(|i| (500.0 * 40f64.powf(i as f64 / 20.0)).round() as u64).collect();
    let mut mean_gap = vec![0.0; checkpoints.len()];
    for seed in 0..seeds {
        let mut cfg = SolverConfig::new(Scheme::SqnUnit);
        cfg.horizon = Some(horizon);
        cfg.gamma0 = Some(1.0);
        cfg.seed = seed;
        cfg.log = LogPolicy::Every;
        let r = run(&p, &cfg).unwrap();
        for (i, c) in checkpoints.iter().enumerate() {
            let rec = r.records.iter().find(|rec| rec.k == *c).unwrap();
            mean_gap[i] += rec.gap.unwrap() / seeds as f64;
        }
    }
    let lx: Vec<f64> = checkpoints.iter().map(|k| (*k as f64).ln()).collect();
    let ly: Vec<f64> = mean_gap.iter().map(|g| g.ln()).collect();
    let s = slope(&lx, &ly);
    assert!((s + 1.0).abs() <= 0.2, "slope {s}");
}

#[test]
fn rvs_mu_goes_to_zero() {
    let p = quad(8, 5, 10.0, Convexity::C);
    let mut cfg = SolverConfig::new(Scheme::RvsSqn);
    cfg.horizon = Some(40);
    cfg.gamma0 = Some(0.05);
    cfg.log = LogPolicy::Every;
    let r = run(&p, &cfg).unwrap();
    let mus: Vec<f64> = r.records.iter().filter_map(|x| x.mu).collect();
    assert!(mus.windows(2).all(|w| w[1] <= w[0]));
    assert!(mus.last().unwrap() < &(0.1 * mus[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn budget_stops_within_one_iteration(budget in 1u64..5000, rate in 0.5f64..0.99, n0 in 1.0f64..20.0) {
        let p = quad(9, 3, 5.0, Convexity::Sc);
        let mut cfg = SolverConfig::new(Scheme::VsSqn);
        cfg.budget = Some(budget);
        cfg.gamma0 = Some(0.05);
        cfg.batch = Some(BatchSchedule::geometric(n0, rate).unwrap());
        let r = run(&p, &cfg).unwrap();
        prop_assert!(r.samples <= budget);
        if r.termination == Termination::Budget {
            let next = cfg.batch.unwrap().eval(r.iterations);
            prop_assert!(r.samples + next > budget);
        }
        prop_assert_eq!(r.last().samples_cum, r.samples);
    }

    #[test]
    fn counters_never_decrease(seed in 0u64..1000, m in 1usize..4) {
        let p = quad(seed, 4, 8.0, Convexity::Sc);
        let mut cfg = SolverConfig::new(Scheme::VsSqn);
        cfg.horizon = Some(30);
        cfg.m = m;
        cfg.gamma0 = Some(0.05);
        cfg.seed = seed;
        let r = run(&p, &cfg).unwrap();
        for w in r.records.windows(2) {
            prop_assert!(w[1].k > w[0].k);
            prop_assert!(w[1].samples_cum >= w[0].samples_cum);
            prop_assert!(w[1].grad_evals_cum >= w[0].grad_evals_cum);
        }
    }
}
