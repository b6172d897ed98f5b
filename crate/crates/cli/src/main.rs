use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cogkit_core::snapshot::Container;
use cogkit_harness::metrics::RunDir;
use cogkit_harness::{run_continual, run_recall, run_rl, EnvKind, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "cogkit", version, about = "Run cogkit experiments and inspect agent snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; omitted keys keep their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics.csv, run.meta, config.cfg and the snapshot.
    #[arg(long)]
    out: PathBuf,
    /// Force every gating mask to all ones.
    #[arg(long)]
    ungated: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Env {
    Rps,
    Maze,
}

#[derive(Subcommand)]
enum Command {
    /// Split-MNIST task sequence; reports accuracy and forgetting.
    Continual(RunArgs),
    /// Reinforcement learning in an environment.
    Rl {
        #[arg(long, value_enum)]
        env: Env,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Serial recall from working memory.
    Recall(RunArgs),
    /// Print the entry directory of a snapshot file.
    Inspect {
        #[arg(long)]
        snapshot: PathBuf,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, RunDir), HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if args.ungated {
        cfg = cfg.ungated();
    }
    Ok((cfg, RunDir::create(&args.out)?))
}

fn inspect(path: &PathBuf) -> Result<(), HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let c = Container::from_bytes(&bytes)?;
    println!("seed {}  entries {}", c.seed(), c.len());
    for (name, entry) in c.entries() {
        println!("{name:<32} {}", entry.describe());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Continual(args) => {
            let (cfg, dir) = load(&args)?;
            let r = run_continual(&cfg, Some(&dir))?;
            for (i, row) in r.accuracy.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
                println!("after task {i}: {}", cells.join(" "));
            }
            println!("ACC {:.4}  F {:.4}", r.acc, r.forgetting);
        }
        Command::Rl { env, run } => {
            let (cfg, dir) = load(&run)?;
            let kind = match env {
                Env::Rps => EnvKind::Rps,
                Env::Maze => EnvKind::Maze,
            };
            let r = run_rl(&cfg, kind, Some(&dir))?;
            let what = match kind {
                EnvKind::Rps => "mean payoff over scored rounds",
                EnvKind::Maze => "success rate over scored episodes",
            };
            println!("{what}: {:.4}", r.score);
        }
        Command::Recall(args) => {
            let (cfg, dir) = load(&args)?;
            let r = run_recall(&cfg, Some(&dir))?;
            for (p, a) in r.by_position.iter().enumerate() {
                println!("position {}: {a:.3}", p + 1);
            }
        }
        Command::Inspect { snapshot } => inspect(&snapshot)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
