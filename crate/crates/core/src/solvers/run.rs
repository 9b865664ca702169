//! The shared iteration loop.

use std::time::Instant;

use crate::hessian::{collect_pair, HessianError, LbfgsMemory, PairMode};
use crate::oracle::{OracleError, RealVector, StochasticProblem};
use crate::regularization::{alternation_step, AlternationState, RegularizedView};
use crate::rng::{RngStream, SampleHandle};
use crate::smoothing::{prox_inner, ProxSpec};

use super::config::Plan;
use super::{IterateRecord, RunResult, Scheme, SolverConfig, SolverError, Termination, TraceEntry};

fn expect_scheme(cfg: &SolverConfig, allowed: &[Scheme]) -> Result<(), SolverError> {
    if allowed.contains(&cfg.scheme) {
        Ok(())
    } else {
        let names: Vec<_> = allowed.iter().map(|s| s.name()).collect();
        Err(SolverError::config(
            "scheme",
            format!("{} is not one of {}", cfg.scheme, names.join(", ")),
        ))
    }
}

pub fn run_vs_sqn<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    expect_scheme(cfg, &[Scheme::VsSqn])?;
    run(problem, cfg)
}

pub fn run_svs_sqn<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    expect_scheme(cfg, &[Scheme::SvsSqnMoreau, Scheme::SvsSqnDiminishing])?;
    run(problem, cfg)
}

pub fn run_rvs_sqn<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    expect_scheme(cfg, &[Scheme::RvsSqn])?;
    run(problem, cfg)
}

pub fn run_rsvs_sqn<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    expect_scheme(cfg, &[Scheme::RsvsSqn])?;
    run(problem, cfg)
}

pub fn run_baseline<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    expect_scheme(cfg, &[Scheme::Sgd, Scheme::SqnUnit, Scheme::ApgBaseline])?;
    run(problem, cfg)
}

/// Runs any scheme.
pub fn run<P: StochasticProblem + ?Sized>(problem: &P, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    let plan = Plan::resolve(problem, cfg)?;
    Runner {
        problem,
        plan: &plan,
        prox: cfg.prox,
        max_prox_residual: 0.0,
    }
    .go(cfg)
}

struct Runner<'a, P: ?Sized> {
    problem: &'a P,
    plan: &'a Plan,
    prox: ProxSpec,
    max_prox_residual: f64,
}

impl<P: StochasticProblem + ?Sized> Runner<'_, P> {
    /// Sampled gradient of the (smoothed) objective on `handle`, without regularization.
    fn base_gradient(&mut self, x: &RealVector, eta: f64, handle: &SampleHandle) -> Result<RealVector, SolverError> {
        if let Some(eta_m) = self.plan.moreau_eta {
            let model = self
                .problem
                .batch_model(handle)
                .ok_or(OracleError::Unsupported("a sampled composite model (batch_model)"))?;
            let r = prox_inner(model.as_ref(), x, eta_m, &self.prox)?;
            self.max_prox_residual = self.max_prox_residual.max(r.residual);
            return Ok((x - r.u) / eta_m);
        }
        Ok(self.problem.batch_gradient(x, eta, handle)?)
    }

    fn record(&self, k: u64, x: &RealVector, t0: Instant, counts: (u64, u64), step_norm: f64) -> IterateRecord {
        let fval = self.problem.value(x);
        let gap = match (fval, self.problem.meta().f_star) {
            (Some(f), Some(fs)) => Some(f - fs),
            _ => None,
        };
        IterateRecord {
            k,
            samples_cum: counts.0,
            grad_evals_cum: counts.1,
            fval,
            gap,
            grad_norm: self.problem.exact_gradient(x, 0.0).map(|g| g.norm()),
            step_norm,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            batch: None,
            gamma: None,
            mu: None,
            eta: None,
        }
    }

    fn go(mut self, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
        let t0 = Instant::now();
        let plan = self.plan;
        let mut stream = RngStream::new(cfg.seed, cfg.stream);
        let mode = plan.pair_mode.unwrap_or(PairMode::Sc);
        let mut memory = LbfgsMemory::new(plan.m, mode, plan.delta, plan.delta_bar)?;
        let momentum = plan.scheme == Scheme::ApgBaseline;
        let center = plan.x0.clone();

        let k0 = plan.k0;
        let mut k = k0;
        let mut x = plan.x0.clone();
        // extrapolated point of the accelerated baseline
        let mut y = x.clone();
        let mut theta = 1.0f64;
        let (mut samples, mut grad_evals) = (0u64, 0u64);
        let mut pairs_formed = 0u64;
        let mut alt = AlternationState::from_schedules(k0, plan.mu.as_ref(), plan.eta.as_ref())?;
        let mut prev: Option<(RealVector, SampleHandle, u64)> = None;
        let mut records = vec![self.record(k0, &x, t0, (0, 0), 0.0)];
        let mut trace = Vec::new();
        let mut avg_acc: Option<(RealVector, f64)> = plan.average.map(|_| (RealVector::zeros(x.len()), 0.0));
        let mut polyak: Option<(RealVector, u64)> = (plan.polyak || plan.scheme == Scheme::Sgd).then(|| (RealVector::zeros(x.len()), 0));
        let step0 = plan.step.eval(k0)?;

        let termination = loop {
            if let Some(h) = plan.horizon {
                if k - k0 >= h {
                    break Termination::Horizon;
                }
            }
            let n_k = plan.batch.eval(k);
            if let Some(b) = plan.budget {
                if samples.saturating_add(n_k) > b {
                    break Termination::Budget;
                }
            }
            if plan.alternate && k > k0 {
                alt = alternation_step(alt, k, plan.mu.as_ref(), plan.eta.as_ref())?;
            }
            let (mu_k, eta_k) = if plan.alternate {
                (plan.mu.map(|_| alt.mu_current), plan.eta.map(|_| alt.eta_current))
            } else {
                (
                    plan.mu.map(|s| s.eval(k)).transpose()?,
                    plan.eta.map(|s| s.eval(k)).transpose()?,
                )
            };
            let eta_oracle = eta_k.unwrap_or(0.0);

            // pairs at odd k reuse the batch of k − 1
            if plan.pair_mode.is_some() && k % 2 == 1 {
                if let Some((x_prev, h_prev, n_prev)) = &prev {
                    let eta_pair = eta_oracle.powf(plan.pair_eta_power);
                    let g_new = self.base_gradient(&x, eta_pair, h_prev)?;
                    let g_old = self.base_gradient(x_prev, eta_pair, h_prev)?;
                    grad_evals += 2 * n_prev;
                    match collect_pair(mode, &x, x_prev, &g_new, &g_old, mu_k.unwrap_or(0.0), eta_pair, plan.delta_bar, k) {
                        Ok(pair) => {
                            memory.push(pair);
                            pairs_formed += 1;
                        }
                        Err(HessianError::ZeroStep { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }

            let handle = stream.take(n_k);
            samples += n_k;
            grad_evals += n_k;
            let at = if momentum { &y } else { &x };
            let mut g = self.base_gradient(at, eta_oracle, &handle)?;
            if let Some(mu) = mu_k {
                g = RegularizedView::new(mu, center.clone())?.value_grad(at, &g, None).1;
            }
            let d = memory.apply(&g);
            let gamma = plan.step.eval(k)?;
            let x_next = at - d * gamma;
            if cfg.trace {
                trace.push(TraceEntry {
                    k,
                    x: at.clone(),
                    gamma,
                    mu: mu_k,
                    eta: eta_k.or(plan.moreau_eta),
                    handle,
                    memory: memory.clone(),
                    x_next: x_next.clone(),
                });
            }
            if let (Some(avg), Some((acc, total))) = (plan.average, avg_acc.as_mut()) {
                let w = avg.weight(n_k);
                if !(w > 0.0) {
                    return Err(SolverError::BatchBound {
                        n0: n_k as f64,
                        bound: avg.c / (avg.lambda_lo * avg.mu * avg.gamma),
                    });
                }
                acc.axpy(w, &x, 1.0);
                *total += w;
            }
            let step_norm = (&x_next - &x).norm();
            if momentum {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                y = &x_next + (&x_next - &x) * ((theta - 1.0) / theta_next);
                theta = theta_next;
            }
            prev = Some((std::mem::replace(&mut x, x_next), handle, n_k));
            k += 1;
            if let Some((acc, cnt)) = polyak.as_mut() {
                acc.axpy(1.0, &x, 1.0);
                *cnt += 1;
            }
            let zero = step_norm == 0.0;
            if cfg.log.wants(k) || zero {
                let mut r = self.record(k, &x, t0, (samples, grad_evals), step_norm);
                r.batch = Some(n_k);
                r.gamma = Some(gamma);
                r.mu = mu_k;
                r.eta = eta_k.or(plan.moreau_eta);
                records.push(r);
            }
            if zero {
                break Termination::ZeroStep;
            }
        };
        if records.last().map(|r| r.k) != Some(k) {
            let step_norm = prev.as_ref().map(|(xp, _, _)| (&x - xp).norm()).unwrap_or(0.0);
            records.push(self.record(k, &x, t0, (samples, grad_evals), step_norm));
        }

        Ok(RunResult {
            scheme: plan.scheme,
            records,
            x_averaged: avg_acc.and_then(|(acc, total)| (total > 0.0).then(|| acc / total)),
            x_polyak: polyak.and_then(|(acc, c)| (c > 0).then(|| acc / c as f64)),
            x_final: x,
            termination,
            iterations: k - k0,
            samples,
            grad_evals,
            pairs_formed,
            theoretical_step: plan.theoretical_step,
            step0,
            nu2_used: plan.nu2,
            max_prox_residual: self.max_prox_residual,
            trace,
        })
    }
}
