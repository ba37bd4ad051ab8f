//! The `phosphor` command-line tool: batch pipeline commands and the
//! experiment server used by the browser trial runner.
//!
//! Artifacts live under one output root:
//!
//! ```text
//! stimuli/        synthetic catalog (synth)
//! preprocessed/   <clip>/<strategy>/gray_*.pfm + pipeline.json
//! rendered/       <clip>/<strategy>/grid<n>/<cell>/spv_*.pgm + render.json
//! sessions/       <subject>/session.json + run.json
//! responses/      <subject>.jsonl, appended by serve
//! analysis/       metrics.json, stats.json, run.json
//! ```

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod serve;

pub use config::RunConfig;
pub use error::CliError;
