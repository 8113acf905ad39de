use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use streamctl_cli::commands::{self, Axis};
use streamctl_cli::{load_config, CliError, RunConfig};
use streamctl_core::reason::TrainMode;

#[derive(Parser)]
#[command(name = "streamctl", version, about = "Streaming control simulator")]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vanilla,
    TargetBalanced,
}

#[derive(Subcommand)]
enum Command {
    /// Train the router and readiness head; writes runlog.csv, runlog.jsonl, policy.json.
    Train {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Compare all-fast, all-slow and adaptive pipelines; writes metrics.json.
    Eval {
        /// Defaults to <out>/policy.json.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Train and evaluate over a grid; writes grid.csv.
    Sweep {
        /// Axis as name=v1,v2,... (tau_near, tau_hist, window, eta, gamma).
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Write the reward-surface table (reward_surface.csv) instead.
        #[arg(long)]
        reward_surface: bool,
    },
    /// Run a stored episode; writes trace.jsonl and metrics.json.
    Replay {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Write the held-out episode as stream.jsonl and queries.jsonl.
    Generate,
    /// Deletion-impact experiment; writes impact.json.
    Impact,
    /// Print the resolved configuration.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config: RunConfig = load_config(cli.config.as_deref(), std::env::vars())?;
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    match cli.command {
        Command::Train { mode } => {
            if let Some(m) = mode {
                config.trainer.mode = match m {
                    ModeArg::Vanilla => TrainMode::Vanilla,
                    ModeArg::TargetBalanced => TrainMode::TargetBalanced,
                };
            }
            let summary = commands::cmd_train(&config)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Eval { policy } => {
            let path = policy.unwrap_or_else(|| config.out.join("policy.json"));
            let report = commands::cmd_eval(&config, &path)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep {
            axes,
            reward_surface,
        } => {
            let path = if reward_surface {
                commands::cmd_reward_surface(&config)?
            } else {
                let axes = axes
                    .iter()
                    .map(|a| a.parse::<Axis>())
                    .collect::<Result<Vec<_>, _>>()?;
                commands::cmd_sweep(&config, &axes)?
            };
            println!("{}", path.display());
        }
        Command::Replay {
            stream,
            queries,
            policy,
        } => {
            let metrics = commands::cmd_replay(&config, &stream, &queries, &policy)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Generate => commands::cmd_generate(&config)?,
        Command::Impact => {
            let s = commands::cmd_impact(&config)?;
            println!(
                "mean_historical_impact {}\nmean_nearby_impact {}",
                s.mean_historical_impact, s.mean_nearby_impact
            );
        }
        Command::Config => print!("{}", config.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
