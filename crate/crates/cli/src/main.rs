//! `wnf-recon`: command-line surface for the visual-tactile reconstruction
//! pipeline. Subcommands: `gen`, `train`, `recon`, `eval`, `selftest`.
//!
//! Exit codes: 0 success, 1 user/config error, 2 internal failure. All
//! commands are deterministic given `--seed`; parallel sections produce the
//! same bytes regardless of `--threads`.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::Config;
use recon_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wnf-recon", version, about = "Visual-tactile in-hand object reconstruction on winding-number fields")]
struct Cli {
    /// Config file (TOML). Falls back to $WNF_RECON_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sections (0 = all cores). Results are
    /// identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Gen {
        /// Output directory for scenes and manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// vision-only | vtaco | vtacoh
        #[arg(long, default_value = "vtaco")]
        variant: String,
        /// Override the configured step count.
        #[arg(long)]
        steps: Option<usize>,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Loss curve CSV (appended to when resuming).
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Reconstruct one scene with a trained checkpoint.
    Recon {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scene directory (as written by `gen`).
        #[arg(long)]
        scene: PathBuf,
        /// Output OBJ path.
        #[arg(long)]
        out: PathBuf,
        /// Use readings from the first K grasps (default: all).
        #[arg(long)]
        grasps: Option<usize>,
        /// direct | hand (sensor poses from stored values or hand FK).
        #[arg(long, default_value = "direct")]
        pose_mode: String,
        /// Also write the decoded field next to the OBJ (.wng).
        #[arg(long)]
        wnf_out: Option<PathBuf>,
    },
    /// Evaluate checkpoints over a manifest's test split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Repeatable: variant=checkpoint-path.
        #[arg(long = "checkpoint", value_name = "VARIANT=PATH")]
        checkpoints: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the embedded oracle self-test suite.
    Selftest,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::DimensionMismatch(_)
        | Error::InvalidMesh(_)
        | Error::InvalidTransform(_)
        | Error::JointLimits(_)
        | Error::RankDeficient(_) => 1,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 1,
        Error::NoSuccessfulTouch | Error::Model(_) | Error::Diverged { .. } | Error::Eval(_) | Error::Io(_) => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; bad usage is a user error.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let mut cfg = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            log::error!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    #[cfg(feature = "parallel")]
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }

    let result = match cli.command {
        Command::Gen { out } => commands::gen::run(&cfg, &out),
        Command::Train {
            manifest,
            out,
            variant,
            steps,
            resume,
            loss_csv,
        } => commands::train::run(&cfg, &manifest, &out, &variant, steps, resume.as_deref(), loss_csv.as_deref()),
        Command::Recon {
            checkpoint,
            scene,
            out,
            grasps,
            pose_mode,
            wnf_out,
        } => commands::recon::run(&cfg, &checkpoint, &scene, &out, grasps, &pose_mode, wnf_out.as_deref()),
        Command::Eval {
            manifest,
            checkpoints,
            out_dir,
        } => commands::eval::run(&cfg, &manifest, &checkpoints, &out_dir),
        Command::Selftest => commands::selftest::run(&cfg),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
