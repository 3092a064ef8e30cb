use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use meadsr::harness::{parse_config, parse_config_file, render_csv, run_experiment, RunOptions};
use meadsr::Protocol;

/// Runs a batch of MANET routing simulations and writes one CSV row per run.
#[derive(Debug, Parser)]
#[command(name = "meadsr-sim", version)]
struct Args {
    /// Experiment file (`key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of consecutive seeds, starting at the plan's first seed.
    #[arg(long)]
    seed_count: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Run only this protocol.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Suppress per-run progress on standard error.
    #[arg(long)]
    quiet: bool,
    /// Also write each run's event trace (JSON lines) into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    let plan = match &args.config {
        Some(path) => parse_config_file(path),
        None => parse_config(""),
    };
    let mut plan = match plan {
        Ok(p) => p,
        Err(e) => {
            eprintln!("meadsr-sim: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = args.seed_count {
        if n == 0 {
            eprintln!("meadsr-sim: --seed-count must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        plan = plan.with_seed_count(n);
    }
    if let Some(p) = args.protocol {
        plan.protocols = vec![p];
    }
    if let Some(dir) = &args.trace_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("meadsr-sim: {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let opts = RunOptions { parallel: args.parallel, quiet: args.quiet, trace_dir: args.trace_dir.as_deref() };
    let results = run_experiment(&plan, &opts);
    let (csv, all_ok) = render_csv(&results);

    let written = match &args.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{csv}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("meadsr-sim: {e}");
        return ExitCode::from(EXIT_RUN);
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        for r in results.iter().filter(|r| r.outcome.is_err()) {
            if let Err(e) = &r.outcome {
                eprintln!("meadsr-sim: {} pause={} seed={}: {e}", r.spec.protocol, r.spec.pause_time_s, r.spec.seed);
            }
        }
        ExitCode::from(EXIT_RUN)
    }
}
