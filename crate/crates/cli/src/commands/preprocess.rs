use super::{gray_path, preprocessed_clip_dir, PIPELINE_FILE};
use crate::artifacts::{create_dir, write_json, FileHash, TOOL_VERSION};
use crate::config::RunConfig;
use crate::error::CliError;
use phosphor_core::dataset::{self, load_aux, load_catalog, load_frame, LoadOptions};
use phosphor_core::netpbm::write_pfm;
use phosphor_core::psych::SCHEMA_VERSION;
use phosphor_core::scene::{apply_strategy, AuxKind, SceneConfig, Strategy};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Sidecar of one preprocessed (clip, strategy) directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub clip_id: String,
    pub strategy: Strategy,
    pub scene: SceneConfig,
    pub fps: f64,
    pub frame_count: usize,
    pub catalog: FileHash,
    /// Source frames and auxiliary maps, named relative to the clip directory.
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// Runs the requested strategies over every selected clip (main and practice).
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<Value, CliError> {
    let catalog_path = cfg.catalog_path()?;
    let catalog = load_catalog(catalog_path, LoadOptions { paper_design: false, check_frames: true })?;
    let catalog_hash = FileHash::of(catalog_path)?;
    let exec = cfg.exec();
    let root = cfg.preprocessed_dir();
    let mut written = 0;

    let clips: Vec<_> = catalog.clips.iter().filter(|c| cfg.wants_clip(&c.clip_id)).collect();
    if clips.is_empty() {
        return Err(CliError::input("NoClips", format!("no catalog clip matches {:?}", cfg.clips)));
    }
    for clip in clips {
        let src = catalog.clip_dir(clip);
        let n = clip.frame_count();
        for &strategy in &cfg.strategies {
            let scene = cfg.scene.for_strategy(strategy);
            let frames = exec.map_range(n, |i| -> Result<_, CliError> {
                let frame = load_frame(&src, i)?;
                let aux = load_aux(&src, i)?;
                let gray = apply_strategy(&frame, &aux, &scene)?;
                let mut inputs = vec![FileHash::of(&dataset::frame_path(&src, i).expect("frame was just loaded"))?];
                for kind in strategy.required_maps() {
                    let p = match kind {
                        AuxKind::Saliency => dataset::saliency_path(&src, i),
                        AuxKind::Depth => dataset::depth_path(&src, i),
                        AuxKind::Labels => dataset::labels_path(&src, i),
                    };
                    inputs.push(FileHash::of(&p)?);
                }
                Ok((gray.into_pixels(), inputs))
            });
            let frames = frames.into_iter().collect::<Result<Vec<_>, _>>()?;

            let dir = preprocessed_clip_dir(&root, &clip.clip_id, strategy);
            create_dir(&dir)?;
            let mut inputs = Vec::new();
            let mut outputs = Vec::new();
            for (i, (pixels, hashes)) in frames.into_iter().enumerate() {
                let path = gray_path(&dir, i);
                write_pfm(&path, &pixels).map_err(|e| CliError::write(&path, e))?;
                outputs.push(FileHash::of(&path)?);
                inputs.extend(hashes);
            }
            let record = PipelineRecord {
                schema_version: SCHEMA_VERSION,
                tool_version: TOOL_VERSION.into(),
                command: "preprocess".into(),
                clip_id: clip.clip_id.clone(),
                strategy,
                scene,
                fps: clip.fps,
                frame_count: n,
                catalog: catalog_hash.clone(),
                inputs,
                outputs,
            };
            write_json(&dir.join(PIPELINE_FILE), &record)?;
            log::info!("preprocessed {} / {} ({n} frames)", clip.clip_id, strategy.name());
            written += 1;
        }
    }
    Ok(json!({ "command": "preprocess", "output": root, "sequences": written }))
}
