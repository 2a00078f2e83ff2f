mod config;
mod expr;
mod failure;
mod implicit;
mod lc;
mod manifold;
mod output;
mod toy;

use clap::{Parser, Subcommand};
use config::Scenario;
use failure::{CmdResult, Failure};
use output::Outputs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hetcycle", version, about = "Neimark–Sacker points, Lyapunov coefficients and manifold growth near focus–saddle tangencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check multipliers, ρ, 𝓔 and the tangency of the toy model.
    ToyVerify,
    /// Solve NS points over a (k, ω, t) grid and write one CSV row each.
    NsScan,
    /// First Lyapunov coefficient of a planar Taylor map.
    Lc,
    /// Grow the unstable set of a weakly repelling point.
    Manifold,
    /// Solve y = G(x) + H(x, y) by contraction.
    SolveImplicit,
}

fn run(cli: &Cli) -> CmdResult {
    let mut scenario = Scenario::load(cli.config.as_deref()).map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(e.to_string()))?;
    }
    let out = Outputs::new(cli.out.clone())?;
    match cli.command {
        Command::ToyVerify => toy::cmd_toy_verify(&scenario, &out),
        Command::NsScan => toy::cmd_ns_scan(&scenario, &out),
        Command::Lc => lc::cmd_lc(&scenario, &out),
        Command::Manifold => manifold::cmd_manifold(&scenario, &out),
        Command::SolveImplicit => implicit::cmd_solve_implicit(&scenario, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
