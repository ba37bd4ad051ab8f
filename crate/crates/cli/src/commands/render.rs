use super::{gray_path, rendered_clip_dir, spv_float_path, spv_path, PIPELINE_FILE, RENDER_FILE};
use crate::artifacts::{create_dir, read_json, sha256_bytes, write_json, FileHash, TOOL_VERSION};
use crate::commands::PipelineRecord;
use crate::config::{RendererKind, RunConfig};
use crate::error::CliError;
use phosphor_core::netpbm::{quantize, read_pfm, write_pfm, write_pgm};
use phosphor_core::psych::{ParamCell, SCHEMA_VERSION};
use phosphor_core::render::{
    build_sensitivity_table_with, render_oracle_with, render_video_with, AmplitudeFrame, AxonMapParams, ElectrodeGrid,
    PerceptFrame, Retina, TableOptions,
};
use phosphor_core::retina::PerceptGridSpec;
use phosphor_core::scene::{encode_amplitudes, GrayFrame, Strategy};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Sidecar of one rendered (clip, strategy, grid, condition) sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub clip_id: String,
    pub strategy: Strategy,
    pub grid: usize,
    pub electrodes: ElectrodeGrid,
    pub param_cell: ParamCell,
    pub params: AxonMapParams,
    pub renderer: RendererKind,
    pub percept: PerceptGridSpec,
    pub retina: Retina,
    /// Only the fast renderer uses a table.
    pub table: Option<TableOptions>,
    pub fps: f64,
    pub frame_count: usize,
    /// `pipeline.json` and the gray frames of the preprocessed directory.
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// SHA-256 of this record with `render_hash` empty.
    pub render_hash: String,
}

struct Job {
    dir: PathBuf,
    record: PipelineRecord,
}

fn find_jobs(cfg: &RunConfig) -> Result<Vec<Job>, CliError> {
    let root = cfg.preprocessed_dir();
    let mut clip_dirs: Vec<PathBuf> = std::fs::read_dir(&root)
        .map_err(|e| CliError::input("MissingInput", format!("{}: {e} (run preprocess first)", root.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    clip_dirs.sort();
    let mut jobs = Vec::new();
    for clip_dir in clip_dirs {
        for &strategy in &cfg.strategies {
            let dir = clip_dir.join(strategy.name());
            let sidecar = dir.join(PIPELINE_FILE);
            if !sidecar.is_file() {
                continue;
            }
            let record: PipelineRecord = read_json(&sidecar)?;
            if cfg.wants_clip(&record.clip_id) {
                jobs.push(Job { dir, record });
            }
        }
    }
    if jobs.is_empty() {
        return Err(CliError::input(
            "MissingInput",
            format!("no preprocessed sequence under {} matches the request (run preprocess first)", root.display()),
        ));
    }
    Ok(jobs)
}

fn load_grays(job: &Job) -> Result<(Vec<GrayFrame>, Vec<FileHash>), CliError> {
    let mut inputs = vec![FileHash::of(&job.dir.join(PIPELINE_FILE))?];
    let mut frames = Vec::with_capacity(job.record.frame_count);
    for i in 0..job.record.frame_count {
        let path = gray_path(&job.dir, i);
        let pixels = read_pfm(&path)?;
        frames.push(GrayFrame::new(pixels, job.record.strategy, i as u64)?);
        inputs.push(FileHash::of(&path)?);
    }
    Ok((frames, inputs))
}

fn to_image(frame: &PerceptFrame) -> Array2<f64> {
    Array2::from_shape_vec((frame.height, frame.width), frame.brightness.clone()).expect("percept frame shape")
}

fn write_sequence(dir: &Path, frames: &[PerceptFrame], float_frames: bool) -> Result<Vec<FileHash>, CliError> {
    create_dir(dir)?;
    let mut out = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let img = to_image(f);
        let path = spv_path(dir, i);
        write_pgm(&path, &quantize(&img.mapv(|v| v * 255.0))).map_err(|e| CliError::write(&path, e))?;
        out.push(FileHash::of(&path)?);
        if float_frames {
            let path = spv_float_path(dir, i);
            write_pfm(&path, &img).map_err(|e| CliError::write(&path, e))?;
            out.push(FileHash::of(&path)?);
        }
    }
    Ok(out)
}

/// Renders every (preprocessed sequence, grid, condition) combination requested.
pub fn cmd_render(cfg: &RunConfig) -> Result<Value, CliError> {
    let jobs = find_jobs(cfg)?;
    let percept = cfg.percept_grid()?;
    let exec = cfg.exec();
    let root = cfg.rendered_dir();
    let grids = cfg.grids.iter().map(|&n| Ok((n, ElectrodeGrid::square(n)?))).collect::<Result<Vec<_>, CliError>>()?;
    let mut hashes = Vec::new();

    for cell in &cfg.param_cells {
        let params = cell.params();
        let table = match cfg.renderer {
            RendererKind::Fast => Some(build_sensitivity_table_with(exec, &percept, &params, &cfg.retina, cfg.table)?),
            RendererKind::Oracle => None,
        };
        log::info!("rendering {} ({} table entries)", cell.label(), table.as_ref().map_or(0, |t| t.entry_count()));
        for job in &jobs {
            let (grays, inputs) = load_grays(job)?;
            let fps = job.record.fps;
            for (n, electrodes) in &grids {
                let amps: Vec<AmplitudeFrame> = grays
                    .iter()
                    .enumerate()
                    .map(|(i, g)| encode_amplitudes(g, electrodes).with_index(i as u64, i as f64 * 1000.0 / fps))
                    .collect();
                let frames = match &table {
                    Some(t) => render_video_with(exec, &amps, electrodes, &params, t)?,
                    None => amps
                        .iter()
                        .map(|a| render_oracle_with(exec, a, electrodes, &params, &percept, &cfg.retina))
                        .collect::<Result<Vec<_>, _>>()?,
                };
                let dir = rendered_clip_dir(&root, &job.record.clip_id, job.record.strategy, *n, cell);
                let outputs = write_sequence(&dir, &frames, cfg.float_frames)?;
                let mut record = RenderRecord {
                    schema_version: SCHEMA_VERSION,
                    tool_version: TOOL_VERSION.into(),
                    command: "render".into(),
                    clip_id: job.record.clip_id.clone(),
                    strategy: job.record.strategy,
                    grid: *n,
                    electrodes: electrodes.clone(),
                    param_cell: *cell,
                    params,
                    renderer: cfg.renderer,
                    percept: percept.spec(),
                    retina: cfg.retina.clone(),
                    table: table.as_ref().map(|_| cfg.table),
                    fps,
                    frame_count: frames.len(),
                    inputs: inputs.clone(),
                    outputs,
                    render_hash: String::new(),
                };
                let basis = serde_json::to_vec(&record).map_err(|e| CliError::internal("Serialize", e.to_string()))?;
                record.render_hash = sha256_bytes(&basis);
                write_json(&dir.join(RENDER_FILE), &record)?;
                hashes.push(record.render_hash);
            }
        }
    }
    Ok(json!({ "command": "render", "output": root, "sequences": hashes.len(), "renderer": cfg.renderer }))
}
