mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "regml", version, about = "Regularized-derivative experiments for the 1+1 dimensional Maxwell-Lorentz model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for multi-run commands; overrides `output.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed recorded with the run; overrides `output.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check every precondition without solving.
    Validate,
    /// Solve at `model.eps` and write the space-time fields.
    Solve,
    /// Pair observables over an ε schedule and classify the limits.
    Sweep,
    /// Sup of the fields beyond a probe point.
    CheckSupport,
    /// Distance from the linearized closed-form solution.
    CompareLin,
    /// Growth of `σ a(u)` near the charge as ε shrinks.
    ProbeBlowup,
    /// World lines through the solved velocity field.
    Trajectories,
    /// Growth condition of width schedules.
    CheckScaling,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = commands::Options { config: cli.config, out: cli.out, workers: cli.workers, seed: cli.seed };
    let result = match cli.command {
        Command::Validate => commands::validate(&opts),
        Command::Solve => commands::solve(&opts),
        Command::Sweep => commands::sweep(&opts),
        Command::CheckSupport => commands::check_support(&opts),
        Command::CompareLin => commands::compare_lin(&opts),
        Command::ProbeBlowup => commands::probe_blowup(&opts),
        Command::Trajectories => commands::trajectories(&opts),
        Command::CheckScaling => commands::check_scaling(&opts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
