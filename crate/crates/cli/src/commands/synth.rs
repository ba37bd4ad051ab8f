use crate::artifacts::{create_dir, write_json, TOOL_VERSION};
use crate::config::RunConfig;
use crate::error::CliError;
use phosphor_core::dataset::generate_synthetic_catalog;
use phosphor_core::psych::SCHEMA_VERSION;
use serde_json::{json, Value};

/// Writes the synthetic stimulus set to `<output_root>/stimuli/`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Value, CliError> {
    let root = cfg.stimuli_dir();
    create_dir(&root)?;
    let catalog = generate_synthetic_catalog(&root, cfg.seed, &cfg.synth).map_err(|e| CliError::write(&root, e))?;
    write_json(
        &root.join("synth.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": TOOL_VERSION,
            "command": "synth",
            "seed": cfg.seed,
            "synth": cfg.synth,
        }),
    )?;
    Ok(json!({
        "command": "synth",
        "catalog": root.join("catalog.json"),
        "clips": catalog.clips.len(),
        "seed": cfg.seed,
    }))
}
