//! `gftd`: train, sample and evaluate guided trajectory diffusion models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Result};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "gftd", version, about = "Guided full-trajectory diffusion for joint trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines under `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the command's random stream; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for scene-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Extra `section.key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the PCA codec and train the denoiser.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output directory for the loss history and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint path (default `<out>/model.ckpt`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sample K joint futures per evaluation scene and score them.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// predict, predict_repaint or robust.
        #[arg(long)]
        preset: Option<String>,
        /// Perturb the evaluation history, e.g. `gaussian:0.15` or `mask:0.75`.
        #[arg(long)]
        perturb: Option<String>,
    },
    /// Goal-conditioned generation with the controllable preset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with header `scene,agent,x,y`.
        #[arg(long)]
        goals: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        perturb: Option<String>,
    },
    /// Score prediction CSVs against scene CSVs.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Prediction CSV, or a directory of them.
        #[arg(long)]
        pred: PathBuf,
        /// Scene CSV, or a directory of them with matching file names.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic training and evaluation scenes.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write perturbed copies of the evaluation scenes.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        perturb: Option<String>,
    },
}

fn resolve(common: &Common, seed_key: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for pair in &common.overrides {
        cfg.set_pair(pair)?;
    }
    if let (Some(seed), Some(key)) = (common.seed, seed_key) {
        cfg.set(key, &seed.to_string())?;
    }
    if common.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(cfg)
}

fn with_perturb(mut cfg: RunConfig, flag: &Option<String>) -> Result<RunConfig> {
    if let Some(flag) = flag {
        commands::apply_perturb_flag(&mut cfg, flag)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, out, checkpoint } => {
            let cfg = resolve(&common, Some("train.seed"))?;
            commands::cmd_train(&cfg, &out, checkpoint.as_deref())
        }
        Command::Predict {
            common,
            checkpoint,
            out,
            preset,
            perturb,
        } => {
            let mut cfg = with_perturb(resolve(&common, Some("sample.seed"))?, &perturb)?;
            if let Some(p) = preset {
                cfg.set("sample.preset", &p)?;
            }
            commands::cmd_predict(&cfg, &checkpoint, &out, common.jobs)
        }
        Command::Generate {
            common,
            checkpoint,
            goals,
            out,
            perturb,
        } => {
            let cfg = with_perturb(resolve(&common, Some("sample.seed"))?, &perturb)?;
            commands::cmd_generate(&cfg, &checkpoint, &goals, &out, common.jobs)
        }
        Command::Eval { common, pred, truth, out } => {
            let cfg = resolve(&common, None)?;
            commands::cmd_eval(&cfg, &pred, &truth, out.as_deref())
        }
        Command::Synth { common, out } => {
            let cfg = resolve(&common, Some("synth.seed"))?;
            commands::cmd_synth(&cfg, &out)
        }
        Command::Perturb { common, out, perturb } => {
            let cfg = with_perturb(resolve(&common, Some("perturb.seed"))?, &perturb)?;
            commands::cmd_perturb(&cfg, &out)
        }
    }
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
