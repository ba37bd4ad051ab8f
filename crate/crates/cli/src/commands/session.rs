use super::{RUN_FILE, SESSION_FILE};
use crate::artifacts::{create_dir, write_json, FileHash, TOOL_VERSION};
use crate::config::RunConfig;
use crate::error::CliError;
use phosphor_core::dataset::{load_catalog, LoadOptions};
use phosphor_core::psych::{make_session, SCHEMA_VERSION};
use serde_json::{json, Value};

/// Writes `sessions/<id>/session.json` for each requested subject.
///
/// Subject `k` (global index) gets `param_cells[k mod len]` and seed `seed + k`.
pub fn cmd_make_session(cfg: &RunConfig) -> Result<Value, CliError> {
    let catalog_path = cfg.catalog_path()?;
    let catalog = load_catalog(catalog_path, LoadOptions { paper_design: true, check_frames: false })?;
    let catalog_hash = FileHash::of(catalog_path)?;
    let root = cfg.sessions_dir();
    let s = &cfg.session;
    let mut ids = Vec::new();
    for index in s.first_subject..s.first_subject + s.subjects {
        let id = s.subject_id(index);
        let cell = cfg.param_cells[index % cfg.param_cells.len()];
        let seed = cfg.seed.wrapping_add(index as u64);
        let plan = make_session(&id, &catalog, cell, seed)?;
        let dir = root.join(&id);
        create_dir(&dir)?;
        write_json(&dir.join(SESSION_FILE), &plan)?;
        write_json(
            &dir.join(RUN_FILE),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "tool_version": TOOL_VERSION,
                "command": "make-session",
                "subject_index": index,
                "base_seed": cfg.seed,
                "seed": seed,
                "param_cells": cfg.param_cells,
                "catalog": catalog_hash,
            }),
        )?;
        ids.push(id);
    }
    Ok(json!({ "command": "make-session", "output": root, "sessions": ids }))
}
