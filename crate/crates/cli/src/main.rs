//! Command-line front end: single simulation runs and parameter sweeps.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etech_core::config::{load_run_config, load_sweep_config};
use etech_core::engine::{simulate, write_trajectory_csv, Completion};
use etech_core::error::Error;
use etech_core::sweep::{grid, run_sweep, SweepSpec};

#[derive(Parser)]
#[command(name = "etech", version, about = "Event-triggered transmission simulator", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a JSON config file.
    Run(RunArgs),
    /// Sweep a harvest-profile family and write per-cell results as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file describing the run.
    #[arg(long)]
    config: PathBuf,
    /// Record the state trajectory and write it to this CSV file.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario preset (s1, s2, or s3). Mutually exclusive with --config.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    /// JSON sweep config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Triggering threshold(s); overrides the preset. May repeat.
    #[arg(long = "epsilon")]
    epsilons: Vec<f64>,
    /// Sweep grid as lo:step:hi; overrides the preset.
    #[arg(long)]
    grid: Option<String>,
    /// Master seed for stochastic scenarios.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(args: RunArgs) -> etech_core::Result<()> {
    let mut config = load_run_config(&args.config)?;
    if args.trajectory.is_some() {
        config.record_trajectory = true;
    }
    let outcome = simulate(&config)?;
    match outcome.completion {
        Completion::Finished(t) => println!("finished: transmission_time={t:.9}"),
        Completion::CutoffExceeded => {
            println!("cutoff exceeded: queue not cleared within t_cutoff={}", config.t_cutoff)
        }
    }
    println!("events: {}", outcome.events.len());
    for ev in &outcome.events {
        println!(
            "  event {:>3}  t={:<12.6} e={:<12.6} q={:<12.6} plan=({:.6}, {:.6})",
            ev.index, ev.t, ev.e, ev.q, ev.plan.power, ev.plan.duration
        );
    }
    if let Some(path) = args.trajectory {
        write_trajectory_csv(&outcome, &path)?;
        println!("trajectory written to {}", path.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> etech_core::Result<()> {
    let mut spec = match (&args.scenario, &args.config) {
        (Some(s), None) => match s.as_str() {
            "s1" => SweepSpec::scenario1(),
            "s2" => SweepSpec::scenario2(),
            "s3" => SweepSpec::scenario3(args.seed.unwrap_or(42)),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario `{other}` (expected s1, s2, or s3)"
                )))
            }
        },
        (None, Some(path)) => load_sweep_config(path)?,
        _ => unreachable!("clap enforces exactly one of --scenario/--config"),
    };
    if !args.epsilons.is_empty() {
        spec.epsilons = args.epsilons.clone();
    }
    if let Some(g) = &args.grid {
        spec.param_grid = parse_grid(g)?;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }

    let result = run_sweep(&spec)?;
    result.emit_csv(&args.out)?;
    println!("{} rows written to {}", result.rows.len(), args.out.display());
    for &eps in &spec.epsilons {
        for &policy in &spec.policies {
            let worst = result.worst_case(eps, policy)?;
            let label = match worst {
                Completion::Finished(t) => format!("{t:.4}"),
                Completion::CutoffExceeded => "INF".into(),
            };
            println!("  worst[eps={eps}, {}] = {label}", policy.label());
        }
    }
    Ok(())
}

fn parse_grid(s: &str) -> etech_core::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, step, hi] = parts.as_slice() else {
        return Err(Error::Config(format!("grid must be lo:step:hi, got `{s}`")));
    };
    let parse = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad grid number `{v}`")))
    };
    let (lo, step, hi) = (parse(lo)?, parse(step)?, parse(hi)?);
    if !(step > 0.0) || hi < lo {
        return Err(Error::Config(format!("grid requires step > 0 and hi >= lo, got `{s}`")));
    }
    Ok(grid(lo, step, hi))
}
