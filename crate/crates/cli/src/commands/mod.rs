//! Batch subcommands. Each returns a JSON summary for stdout.

mod analyze;
mod preprocess;
mod render;
mod session;
mod synth;

pub use analyze::cmd_analyze;
pub use preprocess::{cmd_preprocess, PipelineRecord};
pub use render::{cmd_render, RenderRecord};
pub use session::cmd_make_session;
pub use synth::cmd_synth;

use phosphor_core::psych::ParamCell;
use phosphor_core::scene::Strategy;
use std::path::{Path, PathBuf};

/// `preprocessed/<clip>/<strategy>/`
pub fn preprocessed_clip_dir(root: &Path, clip_id: &str, strategy: Strategy) -> PathBuf {
    root.join(clip_id).join(strategy.name())
}

/// `rendered/<clip>/<strategy>/grid<n>/<cell>/`
pub fn rendered_clip_dir(root: &Path, clip_id: &str, strategy: Strategy, grid: usize, cell: &ParamCell) -> PathBuf {
    root.join(clip_id).join(strategy.name()).join(format!("grid{grid}")).join(cell.label())
}

pub fn gray_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("gray_{index:05}.pfm"))
}

pub fn spv_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("spv_{index:05}.pgm"))
}

pub fn spv_float_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("spv_{index:05}.pfm"))
}

pub const PIPELINE_FILE: &str = "pipeline.json";
pub const RENDER_FILE: &str = "render.json";
pub const SESSION_FILE: &str = "session.json";
pub const RUN_FILE: &str = "run.json";
