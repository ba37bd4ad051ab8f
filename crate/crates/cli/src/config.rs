//! Run configuration: a JSON file, then `PHOSPHOR_SEED`, then command-line flags.

use crate::error::CliError;
use phosphor_core::dataset::SynthOptions;
use phosphor_core::psych::{AnalysisConfig, FdrMode, ParamCell, Pooling, RateCorrection, DEFAULT_RESAMPLES};
use phosphor_core::render::{Retina, TableOptions, PAPER_GRID_SIZES};
use phosphor_core::retina::{build_percept_grid, Extent, PerceptGrid, DEFAULT_PERCEPT_HALF_WIDTH_UM, DEFAULT_PERCEPT_SIZE};
use phosphor_core::scene::{CombinationDepth, SceneConfig, Strategy};
use phosphor_core::Exec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SEED_ENV: &str = "PHOSPHOR_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RendererKind {
    /// Precomputed sensitivity table.
    #[default]
    Fast,
    /// Brute force over every axon segment; slow, used as a reference.
    Oracle,
}

/// Scene parameters other than the strategy, which is enumerated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneOptions {
    pub decay_rate: f64,
    pub depth_percentile: f64,
    pub saliency_percentile: f64,
    pub combination_depth: CombinationDepth,
}

impl Default for SceneOptions {
    fn default() -> Self {
        let d = SceneConfig::default();
        Self {
            decay_rate: d.decay_rate,
            depth_percentile: d.depth_percentile,
            saliency_percentile: d.saliency_percentile,
            combination_depth: d.combination_depth,
        }
    }
}

impl SceneOptions {
    pub fn for_strategy(&self, strategy: Strategy) -> SceneConfig {
        SceneConfig {
            strategy,
            decay_rate: self.decay_rate,
            depth_percentile: self.depth_percentile,
            saliency_percentile: self.saliency_percentile,
            combination_depth: self.combination_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptOptions {
    pub width: usize,
    pub height: usize,
    /// The percept covers `[-half_width_um, half_width_um]` on both axes.
    pub half_width_um: f64,
}

impl Default for PerceptOptions {
    fn default() -> Self {
        Self { width: DEFAULT_PERCEPT_SIZE, height: DEFAULT_PERCEPT_SIZE, half_width_um: DEFAULT_PERCEPT_HALF_WIDTH_UM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    /// Number of sessions `make-session` writes.
    pub subjects: usize,
    /// Global index of the first subject; drives the condition round-robin and the seed offset.
    pub first_subject: usize,
    pub prefix: String,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { subjects: 1, first_subject: 0, prefix: "s".into() }
    }
}

impl SessionOptions {
    pub fn subject_id(&self, index: usize) -> String {
        format!("{}{index:03}", self.prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub pooling: Pooling,
    pub fdr_mode: FdrMode,
    pub correction: RateCorrection,
    pub n_resamples: usize,
    /// Optional between-subject labels, subject id to group name.
    pub groups: BTreeMap<String, String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            pooling: Pooling::default(),
            fdr_mode: FdrMode::default(),
            correction: RateCorrection::default(),
            n_resamples: DEFAULT_RESAMPLES,
            groups: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeOptions {
    pub host: String,
    pub port: u16,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `catalog.json` of the stimulus set. `synth` ignores it.
    pub catalog: Option<PathBuf>,
    /// Every artifact lands below this directory.
    pub output_root: PathBuf,
    /// Restricts batch commands to these clip ids; empty means all clips.
    pub clips: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub grids: Vec<usize>,
    pub param_cells: Vec<ParamCell>,
    pub scene: SceneOptions,
    pub percept: PerceptOptions,
    pub retina: Retina,
    pub table: TableOptions,
    pub renderer: RendererKind,
    /// Also write rendered frames as PFM, unquantized.
    pub float_frames: bool,
    pub seed: u64,
    /// Disable data parallelism inside batch commands.
    pub sequential: bool,
    pub session: SessionOptions,
    pub analysis: AnalysisOptions,
    pub serve: ServeOptions,
    pub synth: SynthOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            output_root: PathBuf::from("phosphor-out"),
            clips: Vec::new(),
            strategies: Strategy::ALL.to_vec(),
            grids: PAPER_GRID_SIZES.to_vec(),
            param_cells: ParamCell::all(),
            scene: SceneOptions::default(),
            percept: PerceptOptions::default(),
            retina: Retina::default(),
            table: TableOptions::default(),
            renderer: RendererKind::default(),
            float_frames: false,
            seed: 0,
            sequential: false,
            session: SessionOptions::default(),
            analysis: AnalysisOptions::default(),
            serve: ServeOptions::default(),
            synth: SynthOptions::default(),
        }
    }
}

/// Values given on the command line. `None` or empty leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub catalog: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sequential: bool,
    pub clips: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub grids: Vec<usize>,
    pub rho_um: Vec<f64>,
    pub lambda_um: Vec<f64>,
    pub percept_size: Option<usize>,
    pub oracle: bool,
    pub float_frames: bool,
    pub subjects: Option<usize>,
    pub first_subject: Option<usize>,
    pub n_resamples: Option<usize>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub fps: Option<f64>,
    pub duration_s: Option<f64>,
}

impl RunConfig {
    /// Reads `path` (if any), then applies `env_seed` and `overrides`, then validates.
    pub fn resolve(path: Option<&Path>, env_seed: Option<&str>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input("ConfigUnreadable", format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::input("ConfigParse", format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::input("InvalidSeed", format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`resolve`](Self::resolve) with the seed variable read from the environment.
    pub fn from_env(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let env = std::env::var(SEED_ENV).ok();
        Self::resolve(path, env.as_deref(), overrides)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(c) = &o.catalog {
            self.catalog = Some(c.clone());
        }
        if let Some(r) = &o.output_root {
            self.output_root = r.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.sequential |= o.sequential;
        if !o.clips.is_empty() {
            self.clips = o.clips.clone();
        }
        if !o.strategies.is_empty() {
            self.strategies = o.strategies.clone();
        }
        if !o.grids.is_empty() {
            self.grids = o.grids.clone();
        }
        if !o.rho_um.is_empty() || !o.lambda_um.is_empty() {
            let rhos = if o.rho_um.is_empty() { unique(self.param_cells.iter().map(|c| c.rho_um)) } else { o.rho_um.clone() };
            let lambdas =
                if o.lambda_um.is_empty() { unique(self.param_cells.iter().map(|c| c.lambda_um)) } else { o.lambda_um.clone() };
            self.param_cells = rhos
                .iter()
                .flat_map(|&rho_um| lambdas.iter().map(move |&lambda_um| ParamCell { rho_um, lambda_um }))
                .collect();
        }
        if let Some(n) = o.percept_size {
            self.percept.width = n;
            self.percept.height = n;
        }
        if o.oracle {
            self.renderer = RendererKind::Oracle;
        }
        self.float_frames |= o.float_frames;
        if let Some(n) = o.subjects {
            self.session.subjects = n;
        }
        if let Some(n) = o.first_subject {
            self.session.first_subject = n;
        }
        if let Some(n) = o.n_resamples {
            self.analysis.n_resamples = n;
        }
        if let Some(h) = &o.host {
            self.serve.host = h.clone();
        }
        if let Some(p) = o.port {
            self.serve.port = p;
        }
        if let Some(f) = o.fps {
            self.synth.fps = f;
        }
        if let Some(d) = o.duration_s {
            self.synth.duration_s = d;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::input("InvalidConfig", msg));
        if let Some(c) = &self.catalog {
            if !c.is_file() {
                return Err(CliError::input("MissingInput", format!("catalog {} does not exist", c.display())));
            }
        }
        if self.strategies.is_empty() || self.grids.is_empty() || self.param_cells.is_empty() {
            return bad("strategies, grids and param_cells must not be empty".into());
        }
        if let Some(g) = self.grids.iter().find(|&&g| g < 2) {
            return bad(format!("grid size {g} is below 2"));
        }
        for c in &self.param_cells {
            c.params().validate().map_err(CliError::from)?;
        }
        self.scene.for_strategy(Strategy::Segmentation).validate()?;
        let p = &self.percept;
        if p.width < 2 || p.height < 2 || !(p.half_width_um > 0.0 && p.half_width_um.is_finite()) {
            return bad(format!("percept {}x{} over +-{} um is degenerate", p.width, p.height, p.half_width_um));
        }
        self.retina.validate().map_err(|e| CliError::input("InvalidConfig", e.to_string()))?;
        if self.session.subjects == 0 {
            return bad("session.subjects must be at least 1".into());
        }
        if self.analysis.n_resamples == 0 {
            return bad("analysis.n_resamples must be at least 1".into());
        }
        let s = &self.synth;
        if !(s.fps > 0.0 && s.fps.is_finite() && s.duration_s > 0.0 && s.duration_s.is_finite()) {
            return bad(format!("synth fps {} and duration {} must be positive", s.fps, s.duration_s));
        }
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn catalog_path(&self) -> Result<&Path, CliError> {
        self.catalog
            .as_deref()
            .ok_or_else(|| CliError::input("MissingInput", "no catalog given (set \"catalog\" or pass --catalog)"))
    }

    pub fn percept_grid(&self) -> Result<PerceptGrid, CliError> {
        let p = &self.percept;
        build_percept_grid(&self.retina.frame, p.width, p.height, Extent::square(p.half_width_um))
            .map_err(|e| CliError::input("InvalidConfig", e.to_string()))
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        let a = &self.analysis;
        AnalysisConfig {
            pooling: a.pooling,
            fdr_mode: a.fdr_mode,
            correction: a.correction,
            n_resamples: a.n_resamples,
            seed: self.seed,
        }
    }

    pub fn wants_clip(&self, clip_id: &str) -> bool {
        self.clips.is_empty() || self.clips.iter().any(|c| c == clip_id)
    }

    pub fn preprocessed_dir(&self) -> PathBuf {
        self.output_root.join("preprocessed")
    }

    pub fn rendered_dir(&self) -> PathBuf {
        self.output_root.join("rendered")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.output_root.join("sessions")
    }

    pub fn responses_dir(&self) -> PathBuf {
        self.output_root.join("responses")
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.output_root.join("analysis")
    }

    pub fn stimuli_dir(&self) -> PathBuf {
        self.output_root.join("stimuli")
    }
}

fn unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence_is_file_env_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 3}"#).unwrap();
        let none = Overrides::default();
        assert_eq!(RunConfig::resolve(Some(&path), None, &none).unwrap().seed, 3);
        assert_eq!(RunConfig::resolve(Some(&path), Some("11"), &none).unwrap().seed, 11);
        let flag = Overrides { seed: Some(5), ..Default::default() };
        assert_eq!(RunConfig::resolve(Some(&path), Some("11"), &flag).unwrap().seed, 5);
        assert_eq!(RunConfig::resolve(None, Some("x"), &none).unwrap_err().kind(), "InvalidSeed");
    }

    #[test]
    fn unknown_fields_and_bad_values_are_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"grid": [8]}"#).unwrap();
        let e = RunConfig::resolve(Some(&path), None, &Overrides::default()).unwrap_err();
        assert_eq!((e.kind(), e.exit_code()), ("ConfigParse", 1));
        let o = Overrides { grids: vec![1], ..Default::default() };
        assert_eq!(RunConfig::resolve(None, None, &o).unwrap_err().kind(), "InvalidConfig");
        let o = Overrides { catalog: Some(dir.path().join("nope.json")), ..Default::default() };
        assert_eq!(RunConfig::resolve(None, None, &o).unwrap_err().kind(), "MissingInput");
    }

    #[test]
    fn rho_and_lambda_flags_cross() {
        let o = Overrides { rho_um: vec![100.0], ..Default::default() };
        let c = RunConfig::resolve(None, None, &o).unwrap();
        assert_eq!(c.param_cells.len(), 3);
        assert!(c.param_cells.iter().all(|p| p.rho_um == 100.0));
        let o = Overrides { rho_um: vec![100.0, 300.0], lambda_um: vec![0.0], ..Default::default() };
        assert_eq!(RunConfig::resolve(None, None, &o).unwrap().param_cells.len(), 2);
    }
}
