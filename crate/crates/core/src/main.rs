use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use extreme_covar::harness::{run_grid, with_threads, write_outputs, format_grid, PlanFile};
use extreme_covar::io::{
    diagnostics_export, estimate_k_range, estimates_tsv, load_pair_series, parse_tau_grid,
    rolling_estimates, rolling_tsv, KRange, RollingPlan,
};
use extreme_covar::models::{Family, ModelConfig, ModelSpec};
use extreme_covar::oracle::{OracleCache, OracleResult};
use extreme_covar::sample::LossPairSample;
use extreme_covar::Result;

/// Extreme CoVaR and CoES estimation from heavy-tailed loss pairs.
#[derive(Parser)]
#[command(name = "extreme-covar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo grid and write MSRE tables.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        /// Overrides the seed in the plan file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Estimate every risk measure for X given Y from two price files.
    Estimate {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// A single k or an inclusive range `lo:hi` to average over.
        #[arg(long)]
        k: KRange,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        json: bool,
    },
    /// Write Hill, tail-probability and R(1,1) curves as TSV files.
    Diagnose {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        kmin: usize,
        #[arg(long)]
        kmax: usize,
        /// `start:end:step` or a comma-separated list of levels.
        #[arg(long, default_value = "0.9:0.995:0.005")]
        taugrid: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-estimate over a moving window of losses.
    Rolling {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long)]
        k: KRange,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        step: usize,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Population VaR, CoVaR and CoES of a simulation model.
    Oracle {
        #[arg(long)]
        model: Family,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
}

fn loss_sample(x: &Path, y: &Path) -> Result<(LossPairSample, Vec<chrono::NaiveDate>)> {
    let (sx, sy) = load_pair_series(x, y)?;
    let dates = sx.loss_dates().to_vec();
    Ok((LossPairSample::new(sx.losses().to_vec(), sy.losses().to_vec())?, dates))
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate {
            plan,
            seed,
            out,
            threads,
        } => {
            let plans = PlanFile::load(&plan)?.plans(seed)?;
            let tables = with_threads(threads, || run_grid(&plans))??;
            write_outputs(&out, &tables)?;
            Ok(format_grid(&tables))
        }
        Command::Estimate { x, y, k, tau, json } => {
            let (sample, _) = loss_sample(&x, &y)?;
            let est = estimate_k_range(&sample, k, tau)?;
            if json {
                Ok(serde_json::to_string_pretty(&est)? + "\n")
            } else {
                Ok(estimates_tsv(&est))
            }
        }
        Command::Diagnose {
            x,
            y,
            kmin,
            kmax,
            taugrid,
            out,
        } => {
            let (sample, _) = loss_sample(&x, &y)?;
            diagnostics_export(&sample, kmin, kmax, &parse_tau_grid(&taugrid)?, &out)?;
            Ok(format!("wrote hill.tsv, tailprob.tsv, r11.tsv to {}\n", out.display()))
        }
        Command::Rolling {
            x,
            y,
            window,
            k,
            tau,
            step,
            out,
        } => {
            let (sample, dates) = loss_sample(&x, &y)?;
            let plan = RollingPlan {
                window,
                k,
                tau_prime: tau,
                step,
            };
            let records = rolling_estimates(&dates, sample.xs(), sample.ys(), &plan)?;
            let tsv = rolling_tsv(&records);
            match out {
                Some(path) => {
                    fs::write(&path, tsv)?;
                    Ok(String::new())
                }
                None => Ok(tsv),
            }
        }
        Command::Oracle {
            model,
            tau,
            theta,
            nu,
            rho,
        } => {
            let spec = ModelSpec::from_config(&ModelConfig {
                family: model,
                theta,
                nu,
                rho,
            })?;
            let o = OracleCache::global().get(&spec, tau)?;
            Ok(format!("{}\n{}\n", OracleResult::TSV_HEADER, o.tsv_row(spec.family)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
