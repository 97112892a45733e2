use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsmnet::{parse_config, run, Stage};

#[derive(Parser)]
#[command(
    name = "lsmnet",
    version,
    about = "Neural least-squares Monte Carlo: policy training, pricing and portfolio P&L"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` in the configuration.
    #[arg(long, global = true, env = "LSMNET_OUT_DIR")]
    out: Option<PathBuf>,
    /// Base seed: training N, pricing N+1, P&L N+2.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Pricing and P&L path count.
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train the continuation networks and save the policy.
    Train,
    /// Price every claim with a saved policy.
    Price,
    /// Build P&L distributions at the configured horizons.
    Pnl,
    /// Rerun the published put and max-call benchmarks.
    Benchmark,
    /// Train, price and build P&L (and benchmark if configured).
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let mut cfg = match parse_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(paths) = cli.paths {
        if paths == 0 {
            eprintln!("error: --paths must be >= 1");
            return ExitCode::from(2);
        }
        cfg.override_paths(paths);
    }
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let out = cli
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("lsmnet-out"));
    let stage = match cli.command {
        Command::Train => Stage::Train,
        Command::Price => Stage::Price,
        Command::Pnl => Stage::Pnl,
        Command::Benchmark => Stage::Benchmark,
        Command::All => Stage::All,
    };
    match run(stage, &cfg, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
