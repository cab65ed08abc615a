use std::path::PathBuf;

use clap::{Parser, Subcommand};

use delaycast_cli::commands::{
    cmd_embed, cmd_evaluate, cmd_reproduce, cmd_rollout, cmd_simulate, cmd_train, Ctx,
};
use delaycast_cli::commands::reproduce::FigureId;
use delaycast_cli::commands::rollout::InitSpec;
use delaycast_cli::config::{ExperimentConfig, Preset, SystemKind};

/// Delay-coordinate forecasting pipeline for chaotic systems.
///
/// Thread count for parallel evaluation loops is pinned by the
/// DELAYCAST_THREADS environment variable (default 1).
#[derive(Parser)]
#[command(name = "delaycast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config JSON; overrides --system/--preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in config family used when --config is not given.
    #[arg(long, value_enum, default_value = "lorenz")]
    system: SystemKind,
    /// Budget preset for the built-in configs.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Output/run directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite artifacts produced under a different config.
    #[arg(long)]
    force: bool,
}

impl ConfigArgs {
    fn ctx(&self) -> anyhow::Result<Ctx> {
        let config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::builtin(self.system, self.preset),
        };
        Ctx::new(config, &self.out, self.force)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth trajectories (training + KL-baseline runs).
    Simulate {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Project observations, run MI/FNN analysis, build delay datasets.
    Embed {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Train models of one kind over the sweep.
    Train {
        #[command(flatten)]
        args: ConfigArgs,
        /// Model kind: dts | node | recon.
        #[arg(long)]
        kind: String,
        /// Train only this seed (partial run; stage stays incomplete).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll a saved model forward from an initial condition.
    Rollout {
        /// Path to the model header (.json).
        #[arg(long)]
        model: PathBuf,
        /// Initial condition: `test:<partial.json>:<k>` or a series file
        /// whose tail is embedded.
        #[arg(long)]
        init: String,
        /// Forecast duration in time units.
        #[arg(long)]
        duration: f64,
        /// Output sampling interval (continuous-time models only; defaults
        /// to the model's delay spacing).
        #[arg(long)]
        sample_dt: Option<f64>,
        /// Output series path (.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Tracking error, long-run statistics, KL divergences, summary table.
    Evaluate {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Run an end-to-end bundle mirroring one of the study's figures.
    Reproduce {
        /// Figure id.
        #[arg(long, value_enum)]
        figure: FigureId,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print a built-in config as JSON (a starting point for custom runs).
    Config {
        #[arg(long, value_enum, default_value = "lorenz")]
        system: SystemKind,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { args } => cmd_simulate(&args.ctx()?),
        Command::Embed { args } => cmd_embed(&args.ctx()?),
        Command::Train { args, kind, seed } => {
            let kind = match kind.as_str() {
                "dts" => delaycast_core::models::ModelKind::Dts,
                "node" => delaycast_core::models::ModelKind::Node,
                "recon" => delaycast_core::models::ModelKind::Recon,
                other => anyhow::bail!("unknown model kind {other:?} (expected dts|node|recon)"),
            };
            cmd_train(&args.ctx()?, kind, seed)
        }
        Command::Rollout { model, init, duration, sample_dt, out } => {
            cmd_rollout(&model, &InitSpec::parse(&init)?, duration, sample_dt, &out)
        }
        Command::Evaluate { args } => cmd_evaluate(&args.ctx()?),
        Command::Reproduce { figure, preset, out, force } => {
            cmd_reproduce(figure, preset, &out, force)
        }
        Command::Config { system, preset } => {
            let cfg = ExperimentConfig::builtin(system, preset);
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(err) = run() {
        // Machine-readable failure channel.
        eprintln!(
            "{}",
            serde_json::json!({ "error": err.to_string(), "chain": format!("{err:#}") })
        );
        std::process::exit(1);
    }
}
