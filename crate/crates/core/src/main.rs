use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opfree::cli::{parse_grid_flag, run, Command, Overrides, DEFAULT_THRESHOLD};

#[derive(Parser)]
#[command(name = "opfree", version, about = "Spectral densities of products of operator-valued free variables")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Density curve by subordination.
    Density(Run),
    /// Monte Carlo spectrum of the random matrix model.
    Simulate(Run),
    /// Both, plus their L1 distance and an SVG overlay.
    Compare(Run),
}

#[derive(Args)]
struct Run {
    /// Run configuration (TOML).
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    /// <min>:<max>:<points>
    #[arg(long, value_parser = parse_grid_flag)]
    grid: Option<(f64, f64, usize)>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    unwrap_k: Option<usize>,
    #[arg(long)]
    skip_bad_points: bool,
    /// Pass/fail bound on the L1 distance (compare only).
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Density(a) => (Command::Density, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Compare(a) => (Command::Compare, a),
    };
    let overrides = Overrides {
        epsilon: args.epsilon,
        grid: args.grid,
        grid_points: args.grid_points,
        tol: args.tol,
        max_iter: args.max_iter,
        damping: args.damping,
        trials: args.trials,
        size: args.size,
        seed: args.seed,
        bins: args.bins,
        unwrap_k: args.unwrap_k,
        skip_bad_points: args.skip_bad_points,
        output_dir: args.out,
    };
    match run(command, &args.config, &overrides, args.threshold, |w| eprintln!("{w}")) {
        Ok(out) => {
            for line in &out.stdout {
                println!("{line}");
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
