//! Building problems, running cells and writing their outputs.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use vssqn::oracle::{RealVector, StochasticProblem};
use vssqn::problems::{
    constraint_violation, isotonic_make, load_sparse_dataset, quad_make, synthetic_sparse_logistic,
    LewisOverton, LogisticProblem,
};
use vssqn::rng::RngStream;
use vssqn::solvers::{run, RunResult};

use crate::config::{ExperimentConfig, ProblemSpec};
use crate::csvlog::{params_csv, CsvLog};
use crate::oracles::sparsity_count;
use crate::HarnessError;

pub fn build_problem(spec: &ProblemSpec) -> Result<Box<dyn StochasticProblem>, HarnessError> {
    Ok(match spec {
        ProblemSpec::Quadratic {
            n,
            kappa,
            convexity,
            spread,
            noise,
            lambda_l1,
            seed,
        } => {
            if *n < 2 || !(*kappa >= 1.0) || !(0.0..1.0).contains(spread) || !(*noise >= 0.0) || !(*lambda_l1 >= 0.0) {
                return Err(HarnessError::Config {
                    key: "problem".into(),
                    msg: "quadratic needs n >= 2, kappa >= 1, spread in [0,1), noise >= 0, lambda_l1 >= 0".into(),
                });
            }
            let q = quad_make(*n, *kappa, *convexity, &mut RngStream::new(*seed, 0)).with_noise(*spread, *noise);
            Box::new(if *lambda_l1 > 0.0 { q.with_l1(*lambda_l1) } else { q })
        }
        ProblemSpec::Logistic {
            dataset,
            samples,
            n,
            density,
            support,
            mu_l2,
            lambda_l1,
            l1,
            seed,
        } => {
            let (data, labels) = match dataset {
                Some(path) => load_sparse_dataset(path)?,
                None => {
                    let (d, l, _) =
                        synthetic_sparse_logistic(*samples, *n, *density, *support, &mut RngStream::new(*seed, 0));
                    (d, l)
                }
            };
            Box::new(LogisticProblem::new(data, labels, *mu_l2, *lambda_l1, *l1)?)
        }
        ProblemSpec::Isotonic {
            samples,
            n,
            lambda_l1,
            penalty_scale,
            seed,
        } => {
            if *n < 4 || *samples == 0 || !(*penalty_scale > 0.0) {
                return Err(HarnessError::Config {
                    key: "problem".into(),
                    msg: "isotonic needs n >= 4, samples >= 1, penalty_scale > 0".into(),
                });
            }
            Box::new(isotonic_make(*samples, *n, *lambda_l1, &mut RngStream::new(*seed, 0)).with_penalty_scale(*penalty_scale))
        }
        ProblemSpec::LewisOverton => Box::new(LewisOverton::default()),
    })
}

/// One run of one configuration.
#[derive(Debug, Clone)]
pub struct Cell {
    pub name: String,
    pub config: ExperimentConfig,
    pub seed: u64,
}

/// Expands repetitions into cells with consecutive seeds.
pub fn cells(configs: &[ExperimentConfig]) -> Vec<Cell> {
    let mut out = Vec::new();
    for c in configs {
        for r in 0..c.repetitions {
            let name = if c.repetitions == 1 {
                c.label.clone()
            } else {
                format!("{}_r{r}", c.label)
            };
            out.push(Cell {
                name,
                config: c.clone(),
                seed: c.solver.seed + r,
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub result: RunResult,
    /// `key = value` summary lines
    pub summary: Vec<(String, String)>,
    pub csv: String,
    pub params: String,
}

pub fn run_cell(cell: &Cell) -> Result<CellOutcome, HarnessError> {
    let problem = build_problem(&cell.config.problem)?;
    let mut cfg = cell.config.solver.clone();
    cfg.seed = cell.seed;
    let n = problem.dim();
    if let Some(x0) = &cfg.x0 {
        if x0.len() == 1 && n > 1 {
            cfg.x0 = Some(vec![x0[0]; n]);
        }
    }
    let result = run(problem.as_ref(), &cfg)?;
    let summary = summarize(problem.as_ref(), &cell.config, &cfg, &result);
    let log = CsvLog::from_records(&result.records);
    Ok(CellOutcome {
        csv: log.to_csv_string()?,
        params: params_csv(&result.records)?,
        cell: cell.clone(),
        result,
        summary,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_else(|| "NA".into())
}

fn summarize(
    problem: &dyn StochasticProblem,
    exp: &ExperimentConfig,
    cfg: &vssqn::solvers::SolverConfig,
    r: &RunResult,
) -> Vec<(String, String)> {
    let last = r.last();
    let out = r.output_point();
    let meta = problem.meta();
    let mut s = vec![
        ("scheme".to_string(), r.scheme.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("m".into(), cfg.m.to_string()),
        ("termination".into(), r.termination.to_string()),
        ("iterations".into(), r.iterations.to_string()),
        ("total_samples".into(), r.samples.to_string()),
        ("total_grad_evals".into(), r.grad_evals.to_string()),
        ("pairs_formed".into(), r.pairs_formed.to_string()),
        ("final_fval".into(), fmt_opt(last.fval)),
        ("final_gap".into(), fmt_opt(last.gap)),
        ("initial_gap".into(), fmt_opt(r.records[0].gap)),
        ("theoretical_step".into(), fmt_opt(r.theoretical_step)),
        ("step0".into(), format!("{}", r.step0)),
        ("nu2_used".into(), format!("{}", r.nu2_used)),
        (
            "sparsity_n0".into(),
            sparsity_count(out, exp.sparsity_threshold).to_string(),
        ),
    ];
    if r.x_averaged.is_some() || r.x_polyak.is_some() {
        let fv = problem.value(out);
        s.push(("output_fval".into(), fmt_opt(fv)));
        s.push((
            "output_gap".into(),
            fmt_opt(fv.zip(meta.f_star).map(|(a, b)| a - b)),
        ));
    }
    if let Some(xs) = &meta.x_star {
        let xs = RealVector::from_vec(xs.clone());
        s.push(("dist_to_xstar".into(), format!("{}", (out - xs).norm())));
    }
    if matches!(exp.problem, ProblemSpec::Isotonic { .. }) {
        s.push(("constraint_violation".into(), format!("{}", constraint_violation(out))));
    }
    if r.max_prox_residual > 0.0 {
        s.push(("max_prox_residual".into(), format!("{}", r.max_prox_residual)));
    }
    s
}

/// Runs all cells on `threads` workers and writes `<name>.csv`, `<name>.params.csv`
/// and a combined `summary.txt` into `out`. Outputs do not depend on `threads`.
pub fn run_all(configs: &[ExperimentConfig], out: &Path, threads: usize) -> Result<Vec<CellOutcome>, HarnessError> {
    let cells = cells(configs);
    let mut seen = std::collections::HashSet::new();
    for c in &cells {
        if !seen.insert(c.name.clone()) {
            return Err(HarnessError::Config {
                key: "label".into(),
                msg: format!("duplicate run name `{}`", c.name),
            });
        }
    }
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let outcomes: Vec<Result<CellOutcome, HarnessError>> = pool.install(|| cells.par_iter().map(run_cell).collect());
    let outcomes: Vec<CellOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let mut summary = String::new();
    for o in &outcomes {
        std::fs::write(out.join(format!("{}.csv", o.cell.name)), &o.csv)?;
        std::fs::write(out.join(format!("{}.params.csv", o.cell.name)), &o.params)?;
        let _ = writeln!(summary, "[{}]", o.cell.name);
        for (k, v) in &o.summary {
            let _ = writeln!(summary, "{k} = {v}");
        }
        summary.push('\n');
    }
    std::fs::write(out.join("summary.txt"), summary)?;
    Ok(outcomes)
}

/// Reads `summary.txt` back into `(section, key, value)` triples.
pub fn parse_summary(text: &str) -> Vec<(String, String, String)> {
    let mut section = String::new();
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.to_string();
        } else if let Some((k, v)) = line.split_once('=') {
            out.push((section.clone(), k.trim().to_string(), v.trim().to_string()));
        }
    }
    out
}
