use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vssqn_harness::{presets, run_all, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "vssqn", about = "Variable sample-size stochastic quasi-Newton experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config file, a preset, or a preset with config overrides.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// overrides the seed of every run
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// List the available presets.
    Presets,
}

fn load(config: Option<PathBuf>, preset: Option<String>, seed: Option<u64>) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let user = match &config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let mut texts = match &preset {
        Some(name) => presets::preset(name).ok_or_else(|| HarnessError::Config {
            key: "preset".into(),
            msg: format!("unknown preset `{name}`; try one of {}", presets::NAMES.join(", ")),
        })?,
        None if config.is_some() => vec![String::new()],
        None => {
            return Err(HarnessError::Config {
                key: "config".into(),
                msg: "pass --config and/or --preset".into(),
            })
        }
    };
    for t in texts.iter_mut() {
        t.push('\n');
        t.push_str(&user);
        if let Some(s) = seed {
            t.push_str(&format!("\nseed = {s}\n"));
        }
    }
    texts.iter().map(|t| ExperimentConfig::parse(t)).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Presets => {
            for n in presets::NAMES {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Run {
            config,
            out,
            seed,
            preset,
            threads,
        } => {
            let res = load(config, preset, seed).and_then(|cfgs| run_all(&cfgs, &out, threads));
            match res {
                Ok(outcomes) => {
                    for o in &outcomes {
                        let get = |k: &str| {
                            o.summary
                                .iter()
                                .find(|(key, _)| key == k)
                                .map(|(_, v)| v.as_str())
                                .unwrap_or("NA")
                        };
                        println!(
                            "{}: {} iterations, {} samples, final gap {}",
                            o.cell.name,
                            get("iterations"),
                            get("total_samples"),
                            get("final_gap")
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
