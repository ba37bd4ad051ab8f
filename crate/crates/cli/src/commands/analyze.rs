use super::{RUN_FILE, SESSION_FILE};
use crate::artifacts::{create_dir, read_json, write_json, FileHash, TOOL_VERSION};
use crate::config::RunConfig;
use crate::error::CliError;
use phosphor_core::psych::{analyze, read_response_log, SessionPlan, SubjectData, SCHEMA_VERSION};
use serde_json::{json, Value};

/// Scores every session under `sessions/` against its log in `responses/`.
///
/// Missing or partial logs are not fatal: the subject's coverage and a
/// warning are reported instead.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Value, CliError> {
    let sessions_dir = cfg.sessions_dir();
    let mut dirs: Vec<_> = std::fs::read_dir(&sessions_dir)
        .map_err(|e| CliError::input("MissingInput", format!("{}: {e}", sessions_dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(SESSION_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::input("MissingInput", format!("no sessions under {}", sessions_dir.display())));
    }

    let mut subjects = Vec::new();
    let mut warnings = Vec::new();
    let mut inputs = Vec::new();
    for dir in dirs {
        let session_file = dir.join(SESSION_FILE);
        let plan: SessionPlan = read_json(&session_file)?;
        inputs.push(json!({ "subject_id": plan.subject_id, "session": FileHash::of(&session_file)? }));
        let log = cfg.responses_dir().join(format!("{}.jsonl", plan.subject_id));
        let responses = if log.is_file() {
            let read = read_response_log(&log).map_err(|e| CliError::input("CorruptLog", e))?;
            warnings.extend(read.warnings);
            inputs.push(json!({ "subject_id": plan.subject_id, "log": FileHash::of(&log)? }));
            read.envelopes
        } else {
            warnings.push(format!("MissingLog: {} has no response log", plan.subject_id));
            Vec::new()
        };
        let group = cfg.analysis.groups.get(&plan.subject_id).cloned();
        subjects.push(SubjectData { plan, responses, group });
    }

    let report = analyze(&subjects, &cfg.analysis_config())?;
    warnings.extend(report.warnings.iter().cloned());
    for w in &warnings {
        log::warn!("{w}");
    }

    let out = cfg.analysis_dir();
    create_dir(&out)?;
    write_json(
        &out.join("metrics.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "metrics": report.metrics,
            "coverage": report.coverage,
            "warnings": warnings,
        }),
    )?;
    write_json(&out.join("stats.json"), &json!({ "schema_version": SCHEMA_VERSION, "stats": report.stats }))?;
    write_json(
        &out.join(RUN_FILE),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": TOOL_VERSION,
            "command": "analyze",
            "analysis": cfg.analysis,
            "seed": cfg.seed,
            "inputs": inputs,
        }),
    )?;
    Ok(json!({
        "command": "analyze",
        "output": out,
        "subjects": subjects.len(),
        "comparisons": report.stats.len(),
        "warnings": warnings.len(),
    }))
}
