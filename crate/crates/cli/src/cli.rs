//! Argument parsing and dispatch.

use crate::commands::{cmd_analyze, cmd_make_session, cmd_preprocess, cmd_render, cmd_synth};
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::serve::cmd_serve;
use clap::{Args, Parser, Subcommand};
use phosphor_core::scene::Strategy;
use serde_json::Value;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "phosphor", version, about = "Simulated prosthetic vision pipeline and experiment server")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply scene simplification strategies to the catalog's clips.
    Preprocess(PreprocessArgs),
    /// Render preprocessed sequences through the phosphene model.
    Render(RenderArgs),
    /// Write randomized session plans.
    MakeSession(SessionArgs),
    /// Serve sessions, stimuli and response collection over HTTP.
    Serve(ServeArgs),
    /// Score recorded sessions.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic stimulus catalog.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Root directory of all artifacts.
    #[arg(long, short = 'o', value_name = "DIR")]
    pub output_root: Option<PathBuf>,
    /// Seed; overrides both the config and PHOSPHOR_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run batch loops on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct Selection {
    #[arg(long, value_name = "JSON")]
    pub catalog: Option<PathBuf>,
    /// Restrict to these clip ids (repeatable).
    #[arg(long = "clip", value_name = "ID")]
    pub clips: Vec<String>,
    /// saliency, depth, segmentation or combination (repeatable).
    #[arg(long = "strategy", value_name = "NAME")]
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// Spatial decay rho in micrometers (repeatable).
    #[arg(long = "rho", value_name = "UM")]
    pub rho_um: Vec<f64>,
    /// Axonal decay lambda in micrometers (repeatable).
    #[arg(long = "lambda", value_name = "UM")]
    pub lambda_um: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub selection: Selection,
    #[command(flatten)]
    pub cells: CellArgs,
    /// Electrode grid side length (repeatable).
    #[arg(long = "grid", value_name = "N")]
    pub grids: Vec<usize>,
    /// Square percept resolution in pixels.
    #[arg(long, value_name = "N")]
    pub percept_size: Option<usize>,
    /// Use the brute-force reference renderer.
    #[arg(long)]
    pub oracle: bool,
    /// Also write unquantized PFM frames.
    #[arg(long)]
    pub float_frames: bool,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "JSON")]
    pub catalog: Option<PathBuf>,
    #[command(flatten)]
    pub cells: CellArgs,
    /// Number of sessions to write.
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Global index of the first subject.
    #[arg(long)]
    pub first_subject: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Catalog, needed to serve source frames of practice trials.
    #[arg(long, value_name = "JSON")]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Bootstrap resamples per comparison.
    #[arg(long)]
    pub n_resamples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long = "duration", value_name = "SECONDS")]
    pub duration_s: Option<f64>,
}

fn overrides(common: &Common) -> Overrides {
    Overrides {
        output_root: common.output_root.clone(),
        seed: common.seed,
        sequential: common.sequential,
        ..Default::default()
    }
}

fn with_selection(mut o: Overrides, s: &Selection) -> Overrides {
    o.catalog = s.catalog.clone();
    o.clips = s.clips.clone();
    o.strategies = s.strategies.clone();
    o
}

fn with_cells(mut o: Overrides, c: &CellArgs) -> Overrides {
    o.rho_um = c.rho_um.clone();
    o.lambda_um = c.lambda_um.clone();
    o
}

/// Resolves the configuration and runs the command.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    let load = |common: &Common, o: Overrides| RunConfig::from_env(common.config.as_deref(), &o);
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(&load(&a.common, with_selection(overrides(&a.common), &a.selection))?),
        Command::Render(a) => {
            let mut o = with_cells(with_selection(overrides(&a.common), &a.selection), &a.cells);
            o.grids = a.grids.clone();
            o.percept_size = a.percept_size;
            o.oracle = a.oracle;
            o.float_frames = a.float_frames;
            cmd_render(&load(&a.common, o)?)
        }
        Command::MakeSession(a) => {
            let mut o = with_cells(overrides(&a.common), &a.cells);
            o.catalog = a.catalog.clone();
            o.subjects = a.subjects;
            o.first_subject = a.first_subject;
            cmd_make_session(&load(&a.common, o)?)
        }
        Command::Serve(a) => {
            let mut o = overrides(&a.common);
            o.catalog = a.catalog.clone();
            o.host = a.host.clone();
            o.port = a.port;
            cmd_serve(&load(&a.common, o)?)
        }
        Command::Analyze(a) => {
            let mut o = overrides(&a.common);
            o.n_resamples = a.n_resamples;
            cmd_analyze(&load(&a.common, o)?)
        }
        Command::Synth(a) => {
            let mut o = overrides(&a.common);
            o.fps = a.fps;
            o.duration_s = a.duration_s;
            cmd_synth(&load(&a.common, o)?)
        }
    }
}
