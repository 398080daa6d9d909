//! `sacfd`: train, evaluate, record demonstrations, serve the live bridge and
//! plot training curves.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sacfd", version, about = "Soft actor-critic from demonstrations on a roundabout simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML with [env], [learner], [expert], [bc], [train]).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enable the rule-based safety shield.
    #[arg(long)]
    shield: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run per seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Seeds to run, sequentially (repeat or comma-separate).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seed: Vec<u64>,
        /// Environment steps per run (overrides the config).
        #[arg(long)]
        steps: Option<u64>,
        /// Plain SAC ablation: no expert buffer.
        #[arg(long)]
        no_demos: bool,
        /// Behaviour-cloning baseline instead of SAC.
        #[arg(long, conflicts_with = "no_demos")]
        bc: bool,
        /// Directory with demonstration files.
        #[arg(long, default_value = "demos")]
        demos: PathBuf,
        /// Skip demonstration episodes with a lower return.
        #[arg(long)]
        min_demo_reward: Option<f64>,
        /// Output directory; each seed gets `seed_<n>/` inside it.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint (or the scripted expert) with deterministic actions.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; omit together with --expert.
        #[arg(long, required_unless_present = "expert")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the scripted expert instead of a checkpoint.
        #[arg(long)]
        expert: bool,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        /// Offset into the evaluation seed range.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record demonstration episodes.
    Record {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ControllerKind::Scripted)]
        controller: ControllerKind,
        /// Checkpoint for `--controller policy`.
        #[arg(long, required_if_eq("controller", "policy"))]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        /// Seed of the first episode; episode k uses seed + k.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "demos")]
        out: PathBuf,
    },
    /// Serve the live driving bridge over WebSocket.
    Serve {
        #[command(flatten)]
        common: Common,
        /// 0 picks a free port.
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Milliseconds per simulation step (the env time step by default).
        #[arg(long)]
        tick_ms: Option<u64>,
        /// Save every finished episode without waiting for the client.
        #[arg(long)]
        autosave: bool,
        /// Stop after this many finished episodes.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value = "demos/human")]
        out: PathBuf,
    },
    /// Plot episode return against step for one or more runs.
    Plot {
        /// Run directories containing metrics.csv.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Curve labels, in `--run` order (defaults to the run mode and seed).
        #[arg(long = "label")]
        labels: Vec<String>,
        /// Expert reference line; computed from --demos when omitted.
        #[arg(long)]
        expert_mean: Option<f64>,
        #[arg(long)]
        demos: Option<PathBuf>,
        /// Moving-average window in episodes.
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value = "returns.svg")]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ControllerKind {
    Scripted,
    Policy,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
