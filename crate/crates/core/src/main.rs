use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use distdetect::analysis::{Guarantee, Verdict};
use distdetect::cli::{run_simulate, run_spectral, run_verify, CliError, RunOptions, ScenarioConfig};

/// Distributed detection simulator and bound checker.
#[derive(Parser)]
#[command(name = "distdetect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trajectories and write per-step errors and costs.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of a high-probability guarantee.
    Verify {
        config: PathBuf,
        /// prop1 (anytime log TV bound) or theorem1 (cost bound, fixed network).
        #[arg(long)]
        which: Guarantee,
        #[command(flatten)]
        common: Common,
    },
    /// Expected mixing matrix, σ₂, connectivity and mixing-deviation sums.
    Spectral {
        config: PathBuf,
        /// Steps at which to tabulate deviation sums (comma separated).
        #[arg(long = "t", value_delimiter = ',')]
        t: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            trials: self.trials,
            out_dir: self.out_dir.clone(),
            threads: self.threads,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate { config, common } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = run_simulate(&cfg, &common.options())?;
            let s = &out.summary;
            println!("digest      {}", s.config_digest);
            println!("B           {:.6}", s.log_bound);
            println!("second      {} (I = {:.6})", s.second_state, s.rate);
            println!("sigma2      {:.6}", s.sigma2);
            println!("eta         {:.6}", s.eta);
            for t in &s.per_trial {
                let worst_tv = t.final_tv_errors.iter().copied().fold(0.0, f64::max);
                let worst_cost = t.total_costs.iter().copied().fold(0.0, f64::max);
                println!(
                    "trial {:>4}  max final TV {:.3e}  max cost {:.6}",
                    t.trial, worst_tv, worst_cost
                );
            }
            println!("wrote {} and {}", out.csv_path.display(), out.summary_path.display());
            Ok(true)
        }
        Command::Verify {
            config,
            which,
            common,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = run_verify(&cfg, which, &common.options())?;
            let o = &out.report.outcome;
            println!(
                "{} with R = {}, eta = {:.6}, sigma2 = {:.6}",
                o.guarantee, o.trials, o.eta, o.sigma2
            );
            for r in &o.reports {
                let at = r.checkpoint.map(|t| format!(" t = {t}")).unwrap_or_default();
                println!(
                    "{:?}{}  bound {:.6}  violations {}/{} = {:.4} (threshold {:.4})",
                    r.verdict, at, r.bound.value, r.violations, r.trials, r.violation_rate, r.threshold
                );
            }
            println!("wrote {}", out.path.display());
            Ok(o.reports.iter().all(|r| r.verdict == Verdict::Pass))
        }
        Command::Spectral { config, t, common } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = run_spectral(&cfg, t.as_deref(), &common.options())?;
            let r = &out.report;
            println!("connected   {}", r.connected);
            match (r.sigma2, r.deviation_bound) {
                (Some(s), Some(b)) => {
                    println!("sigma2      {s:.10}");
                    println!("gap         {:.10}", 1.0 - s);
                    println!("bound       {b:.6}");
                }
                _ => println!("sigma2      1 (expected matrix is disconnected)"),
            }
            for row in &r.deviation {
                println!("t = {:>6}  max deviation sum {:.6}", row.t, row.max);
            }
            println!("wrote {}", out.path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
