//! Command-line harness: config ingestion, training, evaluation, penalty
//! sweeps, baseline comparison and graph instance generation.

mod commands;
mod config;
mod csv_out;
mod error;

use std::path::PathBuf;

use bicl_core::env::generate::Density;
use clap::{Parser, Subcommand};

pub use commands::{
    baseline_run, compare, eval_snapshot, gen_graph, parse_c_values, parse_seeds, run_dir, sweep, sweep_threads,
    train_run, CompareRow, EvalReport, SweepRow, COMPARE_HEADER, SUMMARY_HEADER,
};
pub use config::ExperimentConfig;
pub use csv_out::{sig6, write_metrics_csv, METRICS_HEADER};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "bicl", version, about = "Bi-level coordination learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one bi-level run.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory (default: <output_dir>/<label>/seed-<S>).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a saved snapshot with imitated and with oracle guards.
    Eval {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 30)]
        rollouts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Penalty weight for the oracle (default: the weight stored in the snapshot).
        #[arg(long)]
        c_k: Option<f64>,
    },
    /// Train one run per (c, seed) and write summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "0,1,5,10,50")]
        c_values: String,
        /// Comma list and/or inclusive ranges, e.g. `1,2` or `1..5`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train bi-level and full-action runs per seed and report convergence.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a random graph instance as JSON.
    GenGraph {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        robots: usize,
        #[arg(long, default_value = "sparse")]
        density: Density,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".into(), |e| e.to_string())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { config, seed, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = seed.unwrap_or(cfg.train.seed);
            let dir = output.unwrap_or_else(|| run_dir(&cfg, None).join(format!("seed-{seed}")));
            let result = train_run(&cfg, seed, &dir)?;
            if let Some(last) = result.final_record() {
                println!(
                    "episodes={} t_reward={} rl_reward={} r_gap={} convergence_episode={} dir={}",
                    last.episode,
                    sig6(last.t_reward),
                    sig6(last.rl_reward),
                    sig6(last.r_gap),
                    opt(result.convergence_episode),
                    dir.display()
                );
            }
        }
        Command::Eval { snapshot, rollouts, seed, c_k } => {
            if rollouts == 0 {
                return Err(CliError::Usage("--rollouts must be at least 1".into()));
            }
            let r = eval_snapshot(&snapshot, rollouts, seed, c_k)?;
            println!("t_reward={} rl_reward={} r_gap={}", sig6(r.t_reward), sig6(r.rl_reward), sig6(r.r_gap));
        }
        Command::Sweep { config, c_values, seeds, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = run_dir(&cfg, output.as_deref()).join("sweep");
            let rows = sweep(&cfg, &parse_c_values(&c_values)?, &parse_seeds(&seeds)?, &dir, sweep_threads())?;
            for r in rows {
                println!(
                    "c={} seed={} t_reward={} r_gap={}",
                    sig6(r.c),
                    r.seed,
                    sig6(r.t_reward),
                    sig6(r.r_gap)
                );
            }
            println!("summary={}", dir.join("summary.csv").display());
        }
        Command::Compare { config, seeds, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = run_dir(&cfg, output.as_deref()).join("compare");
            for r in compare(&cfg, &parse_seeds(&seeds)?, &dir, sweep_threads())? {
                println!(
                    "seed={} learner={} convergence_episode={} final_t_reward={}",
                    r.seed,
                    r.learner,
                    opt(r.convergence_episode),
                    sig6(r.final_t_reward)
                );
            }
            println!("report={}", dir.join("compare.csv").display());
        }
        Command::GenGraph { nodes, robots, density, seed, output } => {
            let text = gen_graph(nodes, robots, density, seed, output.as_deref())?;
            if output.is_none() {
                print!("{text}");
            }
        }
    }
    Ok(())
}

/// Parses `argv` (without the program name), runs the subcommand and returns
/// the process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn run_command<S: AsRef<str>>(argv: &[S]) -> i32 {
    let args = std::iter::once("bicl").chain(argv.iter().map(AsRef::as_ref));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
