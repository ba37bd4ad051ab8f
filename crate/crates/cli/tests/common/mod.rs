#![allow(dead_code)]

use phosphor_cli::commands::{cmd_make_session, cmd_preprocess, cmd_render, cmd_synth};
use phosphor_cli::RunConfig;
use phosphor_core::dataset::SynthOptions;
use phosphor_core::psych::ParamCell;
use phosphor_core::render::{FieldSampling, TableOptions};
use std::path::Path;
use tempfile::TempDir;

/// Small synthetic set: 10 frames of 64x48 per clip.
pub fn small_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        output_root: root.to_path_buf(),
        synth: SynthOptions { fps: 2.0, duration_s: 5.0, width: 64, height: 48 },
        seed: 7,
        ..Default::default()
    };
    cfg.percept.width = 16;
    cfg.percept.height = 16;
    cfg.table = TableOptions { field: FieldSampling::Exact, ..Default::default() };
    cfg.analysis.n_resamples = 500;
    cfg
}

pub struct Fixture {
    pub dir: TempDir,
    pub cfg: RunConfig,
}

/// Synthetic catalog, every strategy preprocessed and `sessions` session plans.
/// With `render`, every stimulus of the first condition is rendered too.
pub fn fixture(sessions: usize, render: bool) -> Fixture {
    // under target/ so a shared fixture never outlives `cargo clean`
    let dir = tempfile::tempdir_in(env!("CARGO_TARGET_TMPDIR")).unwrap();
    let mut cfg = small_config(dir.path());
    cmd_synth(&cfg).unwrap();
    cfg.catalog = Some(cfg.stimuli_dir().join("catalog.json"));
    cmd_preprocess(&cfg).unwrap();
    cfg.session.subjects = sessions;
    cfg.param_cells = vec![ParamCell::for_subject(0)];
    cmd_make_session(&cfg).unwrap();
    if render {
        cmd_render(&cfg).unwrap();
    }
    Fixture { dir, cfg }
}

pub fn count_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).map(|t| t.lines().filter(|l| !l.trim().is_empty()).count()).unwrap_or(0)
}
