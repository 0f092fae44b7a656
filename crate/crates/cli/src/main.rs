use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homoglab_cli::{replay, run, ExperimentConfig, Pipeline};

#[derive(Parser)]
#[command(name = "homoglab", version, about = "Homogenization and three-ball audit laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cell problem and homogenized tensor.
    Cell(RunArgs),
    /// Dirichlet solves for each ε.
    Solve(RunArgs),
    /// Three-ball audit for each ε.
    Audit(RunArgs),
    /// ε-sweep of the kernel defect and audit constant.
    Sweep(RunArgs),
    /// Chained three-ball propagation of smallness.
    Propagate(RunArgs),
    /// Half-disk solves and their reflections.
    Halfball(RunArgs),
    /// Eigen-type solves lifted to one more dimension.
    Lift(RunArgs),
    /// Rerun a report from its embedded config and diff the results.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `run.out`, then `out/<pipeline>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Report file or the directory holding `report.json`.
    report: PathBuf,
    /// Where to keep the recomputed artifacts (default: a temporary directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
}

fn run_pipeline(pipeline: Pipeline, args: RunArgs) -> ExitCode {
    set_threads(args.threads);
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration:\n  - {}", e.trim_end());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let out = args
        .out
        .or_else(|| config.run.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(pipeline.to_string()));
    let mut stdout = std::io::stdout();
    match run(pipeline, &config, &out, &mut stdout) {
        Ok(_) => {
            println!("{pipeline}: artifacts in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_replay(args: ReplayArgs) -> ExitCode {
    set_threads(args.threads);
    let tmp;
    let out = match args.out {
        Some(p) => p,
        None => match tempfile::tempdir() {
            Ok(d) => {
                tmp = d;
                tmp.path().to_path_buf()
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
    };
    let mut sink = std::io::sink();
    match replay(&args.report, &out, &mut sink) {
        Ok(outcome) if outcome.drift.is_empty() => {
            println!("replay: no drift");
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            for d in &outcome.drift {
                println!("{}: recorded {} recomputed {}", d.path, d.recorded, d.recomputed);
            }
            println!("replay: {} field(s) drifted", outcome.drift.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Cell(a) => run_pipeline(Pipeline::Cell, a),
        Command::Solve(a) => run_pipeline(Pipeline::Solve, a),
        Command::Audit(a) => run_pipeline(Pipeline::Audit, a),
        Command::Sweep(a) => run_pipeline(Pipeline::Sweep, a),
        Command::Propagate(a) => run_pipeline(Pipeline::Propagate, a),
        Command::Halfball(a) => run_pipeline(Pipeline::Halfball, a),
        Command::Lift(a) => run_pipeline(Pipeline::Lift, a),
        Command::Replay(a) => run_replay(a),
    }
}
