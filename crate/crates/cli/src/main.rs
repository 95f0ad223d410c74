//! `rangemos` command-line front end.

mod commands;
mod config;
mod output;
mod sequence;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "rangemos",
    version,
    about = "Moving object segmentation on LiDAR range images"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project a scan to a range image (planar f32 channels plus a PNG).
    Project {
        /// Scan index within the sequence.
        #[arg(long, conflicts_with = "scan")]
        index: Option<usize>,
        /// A standalone scan file instead of a sequence index.
        #[arg(long)]
        scan: Option<PathBuf>,
    },
    /// Associate previous scans with scan `index` and write the index maps.
    Associate {
        #[arg(long)]
        index: usize,
        /// Write absent entries as 0 instead of -1.
        #[arg(long)]
        zero_sentinel: bool,
    },
    /// Range residuals between scan `index` and its reprojected predecessors.
    Residual {
        #[arg(long)]
        index: usize,
    },
    /// Segment every scan of the sequence.
    Segment {
        /// Score predictions against ground truth and write a report.
        #[arg(long)]
        evaluate: bool,
        /// Stop at the first failing scan and exit nonzero.
        #[arg(long)]
        strict: bool,
    },
    /// Score existing prediction files against ground truth.
    Evaluate {
        /// Prediction directory; defaults to `<out>/predictions`.
        #[arg(long)]
        pred_dir: Option<PathBuf>,
    },
    /// Render images as 8-bit PNGs.
    Render {
        #[arg(long)]
        index: usize,
        #[arg(long, value_enum)]
        mode: RenderMode,
        /// Prediction file for labels mode; computed on the fly when absent.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Residual value mapped to white.
        #[arg(long, default_value_t = 1.0)]
        clip: f32,
        /// Render every channel in range mode, not just range.
        #[arg(long)]
        all_channels: bool,
    },
    /// Generate the synthetic street sequence.
    Synth {
        #[arg(long, default_value_t = 10)]
        scans: usize,
        /// Gaussian range noise along each ray, meters.
        #[arg(long, default_value_t = 0.0)]
        range_noise: f64,
        /// Gaussian noise on the written pose translations, meters.
        #[arg(long, default_value_t = 0.0)]
        pose_noise: f64,
        /// Scene description (TOML) replacing the built-in street.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigAction {
    /// Print the merged configuration as TOML.
    Dump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Range,
    Residual,
    Labels,
    Association,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = cli.overrides.load().and_then(|cfg| match cli.command {
        Command::Project { index, scan } => commands::project(&cfg, index, scan.as_deref()),
        Command::Associate {
            index,
            zero_sentinel,
        } => commands::associate(&cfg, index, zero_sentinel),
        Command::Residual { index } => commands::residual(&cfg, index),
        Command::Segment { evaluate, strict } => commands::segment(&cfg, evaluate, strict),
        Command::Evaluate { pred_dir } => commands::evaluate(&cfg, pred_dir.as_deref()),
        Command::Render {
            index,
            mode,
            pred,
            clip,
            all_channels,
        } => commands::render(&cfg, index, mode, pred.as_deref(), clip, all_channels),
        Command::Synth {
            scans,
            range_noise,
            pose_noise,
            scene,
        } => commands::synth(&cfg, scans, range_noise, pose_noise, scene.as_deref()),
        Command::Config {
            action: ConfigAction::Dump,
        } => commands::config_dump(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
