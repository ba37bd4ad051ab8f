//! Stimulus catalogs, per-frame file layout and the synthetic street-scene generator.
//!
//! A clip directory holds, for frame `i` (zero based, five digits):
//! `frame_i.pgm` (or `.ppm`), `saliency_i.pfm`, `depth_i.pfm` and `labels_i.pgm`.

use crate::netpbm::{self, NetpbmError};
use crate::scene::{
    fallback_saliency, is_object_label, AuxMaps, Pixels, VideoFrame, LABEL_BACKGROUND, LABEL_CAR, LABEL_PERSON,
    LABEL_ROAD, LABEL_SIDEWALK,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PAPER_CLIP_COUNT: usize = 16;
pub const PAPER_CLIPS_PER_CATEGORY: usize = 4;
pub const PAPER_PRACTICE_COUNT: usize = 8;
pub const PAPER_DURATION_S: f64 = 5.0;
/// Not stated for the recordings; a conventional video rate.
pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse manifest {path}: {msg}")]
    ManifestParse { path: PathBuf, msg: String },
    #[error("catalog is not the 16-clip balanced design: {0}")]
    CategoryImbalance(String),
    #[error("clip {clip_id}: expected {expected} frames in {dir}, {msg}")]
    MissingFrames { clip_id: String, dir: PathBuf, expected: usize, msg: String },
    #[error("clip {clip_id}: {msg}")]
    InvalidClip { clip_id: String, msg: String },
    #[error(transparent)]
    Netpbm(#[from] NetpbmError),
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: crate::scene::SceneError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Which targets a clip contains: Neither, Cars, Cars and People, People.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    N,
    C,
    CP,
    P,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::N, Category::C, Category::CP, Category::P];

    pub fn from_truth(has_people: bool, has_cars: bool) -> Self {
        match (has_people, has_cars) {
            (false, false) => Category::N,
            (false, true) => Category::C,
            (true, true) => Category::CP,
            (true, false) => Category::P,
        }
    }

    pub fn has_people(self) -> bool {
        matches!(self, Category::P | Category::CP)
    }

    pub fn has_cars(self) -> bool {
        matches!(self, Category::C | Category::CP)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::N => "N",
            Category::C => "C",
            Category::CP => "CP",
            Category::P => "P",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundTruth {
    pub has_people: bool,
    pub has_cars: bool,
}

impl GroundTruth {
    /// Any target present in a label map. Bicycles count as neither target, buses as cars.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a u8>) -> Self {
        let mut gt = GroundTruth { has_people: false, has_cars: false };
        for &l in labels {
            gt.has_people |= l == LABEL_PERSON;
            gt.has_cars |= l == LABEL_CAR || l == crate::scene::LABEL_BUS;
        }
        gt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusClip {
    pub clip_id: String,
    /// Frame directory, relative to the manifest unless absolute.
    pub dir: PathBuf,
    pub fps: f64,
    pub duration_s: f64,
    pub category: Category,
    pub has_people: bool,
    pub has_cars: bool,
    /// Practice clips are shown before the main trials and never inside them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub practice: bool,
}

impl StimulusClip {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth { has_people: self.has_people, has_cars: self.has_cars }
    }

    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| DatasetError::InvalidClip { clip_id: self.clip_id.clone(), msg };
        if self.clip_id.is_empty() {
            return Err(bad("empty clip_id".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) || !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(bad(format!("fps {} and duration {} must be positive", self.fps, self.duration_s)));
        }
        if Category::from_truth(self.has_people, self.has_cars) != self.category {
            return Err(bad(format!(
                "category {} contradicts has_people={} has_cars={}",
                self.category.name(),
                self.has_people,
                self.has_cars
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    clips: Vec<StimulusClip>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusCatalog {
    pub clips: Vec<StimulusClip>,
    /// 16 main clips, 4 per category, 5 s each.
    pub balanced: bool,
    /// Directory relative clip paths are resolved against.
    pub root: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Reject catalogs that are not the balanced 16-clip design.
    pub paper_design: bool,
    /// Verify every frame file exists.
    pub check_frames: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { paper_design: true, check_frames: true }
    }
}

impl StimulusCatalog {
    pub fn new(clips: Vec<StimulusClip>, root: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for c in &clips {
            c.validate()?;
            if !seen.insert(c.clip_id.as_str()) {
                return Err(DatasetError::InvalidClip { clip_id: c.clip_id.clone(), msg: "duplicate clip_id".into() });
            }
        }
        let balanced = is_balanced(&clips);
        Ok(Self { clips, balanced, root: root.into() })
    }

    pub fn main_clips(&self) -> impl Iterator<Item = &StimulusClip> {
        self.clips.iter().filter(|c| !c.practice)
    }

    pub fn practice_clips(&self) -> impl Iterator<Item = &StimulusClip> {
        self.clips.iter().filter(|c| c.practice)
    }

    pub fn clip(&self, clip_id: &str) -> Option<&StimulusClip> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn clip_dir(&self, clip: &StimulusClip) -> PathBuf {
        self.root.join(&clip.dir)
    }

    /// Main-clip count per category.
    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        category_counts(&self.clips)
    }
}

fn category_counts(clips: &[StimulusClip]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for c in clips.iter().filter(|c| !c.practice) {
        *counts.entry(c.category).or_default() += 1;
    }
    counts
}

fn is_balanced(clips: &[StimulusClip]) -> bool {
    let main: Vec<_> = clips.iter().filter(|c| !c.practice).collect();
    main.len() == PAPER_CLIP_COUNT
        && category_counts(clips).values().all(|&n| n == PAPER_CLIPS_PER_CATEGORY)
        && main.iter().all(|c| c.duration_s == PAPER_DURATION_S)
}

pub fn load_catalog(path: &Path, opts: LoadOptions) -> Result<StimulusCatalog, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| DatasetError::ManifestParse { path: path.to_path_buf(), msg: e.to_string() })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let catalog = StimulusCatalog::new(manifest.clips, root)?;
    if opts.paper_design && !catalog.balanced {
        let counts: Vec<String> = catalog.category_counts().iter().map(|(k, v)| format!("{}={v}", k.name())).collect();
        return Err(DatasetError::CategoryImbalance(format!(
            "{} main clips ({}), need {PAPER_CLIP_COUNT} with {PAPER_CLIPS_PER_CATEGORY} per category, {PAPER_DURATION_S} s each",
            catalog.main_clips().count(),
            counts.join(", ")
        )));
    }
    if opts.check_frames {
        for clip in &catalog.clips {
            check_frames(clip, &catalog.clip_dir(clip))?;
        }
    }
    Ok(catalog)
}

pub fn save_catalog(catalog: &StimulusCatalog, path: &Path) -> Result<(), DatasetError> {
    let json = serde_json::to_string_pretty(&Manifest { clips: catalog.clips.clone() }).expect("catalog serializes");
    fs::write(path, json + "\n").map_err(io_err(path))
}

fn check_frames(clip: &StimulusClip, dir: &Path) -> Result<(), DatasetError> {
    let expected = clip.frame_count();
    let missing = |msg: String| DatasetError::MissingFrames {
        clip_id: clip.clip_id.clone(),
        dir: dir.to_path_buf(),
        expected,
        msg,
    };
    if !dir.is_dir() {
        return Err(missing("directory does not exist".into()));
    }
    let present = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .filter(|e| e.file_name().to_string_lossy().starts_with("frame_"))
        .count();
    if let Some(i) = (0..expected).find(|&i| frame_path(dir, i).is_none()) {
        return Err(missing(format!("frame {i} is missing")));
    }
    if present != expected {
        return Err(missing(format!("found {present}")));
    }
    Ok(())
}

fn numbered(dir: &Path, stem: &str, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_{index:05}.{ext}"))
}

/// The frame file for `index`, grayscale preferred over RGB.
pub fn frame_path(dir: &Path, index: usize) -> Option<PathBuf> {
    ["pgm", "ppm"].iter().map(|ext| numbered(dir, "frame", index, ext)).find(|p| p.is_file())
}

pub fn saliency_path(dir: &Path, index: usize) -> PathBuf {
    numbered(dir, "saliency", index, "pfm")
}

pub fn depth_path(dir: &Path, index: usize) -> PathBuf {
    numbered(dir, "depth", index, "pfm")
}

pub fn labels_path(dir: &Path, index: usize) -> PathBuf {
    numbered(dir, "labels", index, "pgm")
}

pub fn load_frame(dir: &Path, index: usize) -> Result<VideoFrame, DatasetError> {
    let path = frame_path(dir, index).ok_or_else(|| DatasetError::Io {
        path: numbered(dir, "frame", index, "pgm"),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no frame_*.pgm or frame_*.ppm"),
    })?;
    let pixels = if path.extension().is_some_and(|e| e == "ppm") {
        Pixels::Rgb(netpbm::read_ppm(&path)?)
    } else {
        Pixels::Gray(netpbm::read_pgm(&path)?)
    };
    VideoFrame::new(pixels, index as u64).map_err(|source| DatasetError::Frame { index, source })
}

/// Loads whichever auxiliary maps exist for a frame.
pub fn load_aux(dir: &Path, index: usize) -> Result<AuxMaps, DatasetError> {
    let opt = |p: PathBuf| p.is_file().then_some(p);
    Ok(AuxMaps {
        saliency: opt(saliency_path(dir, index)).map(|p| netpbm::read_pfm(&p)).transpose()?,
        depth: opt(depth_path(dir, index)).map(|p| netpbm::read_pfm(&p)).transpose()?,
        labels: opt(labels_path(dir, index)).map(|p| netpbm::read_pgm(&p)).transpose()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub fps: f64,
    pub duration_s: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { fps: DEFAULT_FPS, duration_s: PAPER_DURATION_S, width: 160, height: 120 }
    }
}

/// Far plane of the synthetic depth maps (sky and horizon).
const FAR_DEPTH: f64 = 100.0;
const NEAR_DEPTH: f64 = 5.0;

#[derive(Debug, Clone)]
struct Mover {
    label: u8,
    w: f64,
    h: f64,
    x0: f64,
    /// Image row of the object's lowest pixel.
    foot: f64,
    vx: f64,
    tone: f64,
    stripe: f64,
}

impl Mover {
    /// Left edge at frame `t`, bouncing inside the frame.
    fn left(&self, t: f64, width: f64) -> f64 {
        let span = (width - self.w).max(0.0);
        if span == 0.0 {
            return 0.0;
        }
        let p = (self.x0 + self.vx * t).rem_euclid(2.0 * span);
        if p > span {
            2.0 * span - p
        } else {
            p
        }
    }
}

struct Layout {
    horizon: usize,
    road_lo: usize,
    road_hi: usize,
}

impl Layout {
    fn new(w: usize, h: usize) -> Self {
        Self { horizon: h * 2 / 5, road_lo: w / 5, road_hi: w - w / 5 }
    }

    fn ground_depth(&self, row: f64, h: usize) -> f64 {
        let t = ((row - self.horizon as f64) / (h - 1 - self.horizon) as f64).clamp(0.0, 1.0);
        FAR_DEPTH - (FAR_DEPTH - NEAR_DEPTH) * t
    }
}

fn spawn(rng: &mut ChaCha8Rng, label: u8, o: &SynthOptions, layout: &Layout) -> Mover {
    let (w, h) = (o.width as f64, o.height as f64);
    let ground = (h - 1.0) - layout.horizon as f64;
    if label == LABEL_CAR {
        let cw = rng.random_range(0.22..0.32) * w;
        let aspect = rng.random_range(1.9..2.6);
        Mover {
            label,
            w: cw,
            h: cw / aspect,
            x0: rng.random_range(0.0..w),
            foot: layout.horizon as f64 + ground * rng.random_range(0.35..0.55),
            vx: rng.random_range(1.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            tone: rng.random_range(170.0..230.0),
            stripe: 40.0,
        }
    } else {
        let ph = rng.random_range(0.30..0.40) * h;
        let aspect = rng.random_range(0.30..0.50);
        Mover {
            label,
            w: ph * aspect,
            h: ph,
            x0: rng.random_range(0.0..w),
            foot: layout.horizon as f64 + ground * rng.random_range(0.75..0.95),
            vx: rng.random_range(0.3..0.8) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            tone: rng.random_range(20.0..50.0),
            stripe: 25.0,
        }
    }
}

/// One frame of a synthetic scene: `(gray, depth, labels)`.
fn draw_frame(
    t: usize,
    o: &SynthOptions,
    layout: &Layout,
    background: &Array2<f64>,
    movers: &[Mover],
) -> (Array2<u8>, Array2<f64>, Array2<u8>) {
    let (w, h) = (o.width, o.height);
    let mut gray = background.clone();
    let mut depth = Array2::from_shape_fn((h, w), |(r, _)| layout.ground_depth(r as f64, h));
    let mut labels = Array2::from_shape_fn((h, w), |(r, c)| {
        if r < layout.horizon {
            LABEL_BACKGROUND
        } else if (layout.road_lo..layout.road_hi).contains(&c) {
            LABEL_ROAD
        } else {
            LABEL_SIDEWALK
        }
    });
    // farthest first so nearer objects occlude
    let mut order: Vec<&Mover> = movers.iter().collect();
    order.sort_by(|a, b| a.foot.total_cmp(&b.foot));
    for m in order {
        let left = m.left(t as f64, w as f64);
        let c0 = left.round() as usize;
        let c1 = ((left + m.w).round() as usize).min(w);
        let r1 = (m.foot.round() as usize + 1).min(h);
        let r0 = (m.foot - m.h).round().max(0.0) as usize;
        let d = layout.ground_depth(m.foot, h) - 1.0;
        for r in r0..r1 {
            for c in c0..c1 {
                // stripes move with the object
                let band = ((c - c0) / 4 + (r - r0) / 6) % 2;
                gray[[r, c]] = m.tone + if band == 0 { 0.0 } else { m.stripe };
                depth[[r, c]] = d;
                labels[[r, c]] = m.label;
            }
        }
    }
    (netpbm::quantize(&gray), depth, labels)
}

fn background(o: &SynthOptions, layout: &Layout, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (w, h) = (o.width, o.height);
    let sky_top = rng.random_range(150.0..170.0);
    let ground = rng.random_range(95.0..110.0);
    Array2::from_shape_fn((h, w), |(r, c)| {
        if r < layout.horizon {
            sky_top - 20.0 * r as f64 / layout.horizon as f64
        } else if (layout.road_lo..layout.road_hi).contains(&c) {
            ground
        } else {
            ground + 6.0
        }
    })
}

/// Renders a clip into `root/clip_id` and returns its catalog entry (with `dir = clip_id`).
///
/// Cars are wide (aspect at least 1.9) and move quickly, people are tall (aspect at most 0.5)
/// and slow; all objects stay fully inside the frame. Output is a pure function of the arguments.
pub fn generate_synthetic_clip(
    root: &Path,
    clip_id: &str,
    category: Category,
    seed: u64,
    opts: &SynthOptions,
) -> Result<StimulusClip, DatasetError> {
    if opts.width < crate::scene::MIN_FRAME_SIDE || opts.height < crate::scene::MIN_FRAME_SIDE {
        return Err(DatasetError::InvalidClip {
            clip_id: clip_id.into(),
            msg: format!("frame {}x{} is too small", opts.width, opts.height),
        });
    }
    let clip = StimulusClip {
        clip_id: clip_id.into(),
        dir: PathBuf::from(clip_id),
        fps: opts.fps,
        duration_s: opts.duration_s,
        category,
        has_people: category.has_people(),
        has_cars: category.has_cars(),
        practice: false,
    };
    clip.validate()?;
    let dir = root.join(clip_id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout::new(opts.width, opts.height);
    let bg = background(opts, &layout, &mut rng);
    let mut movers = Vec::new();
    if category.has_cars() {
        for _ in 0..rng.random_range(1..=2) {
            movers.push(spawn(&mut rng, LABEL_CAR, opts, &layout));
        }
    }
    if category.has_people() {
        for _ in 0..rng.random_range(1..=2) {
            movers.push(spawn(&mut rng, LABEL_PERSON, opts, &layout));
        }
    }

    for t in 0..clip.frame_count() {
        let (gray, depth, labels) = draw_frame(t, opts, &layout, &bg, &movers);
        let frame = VideoFrame::new(Pixels::Gray(gray.clone()), t as u64).expect("size checked above");
        netpbm::write_pgm(&numbered(&dir, "frame", t, "pgm"), &gray)?;
        netpbm::write_pfm(&saliency_path(&dir, t), &fallback_saliency(&frame))?;
        netpbm::write_pfm(&depth_path(&dir, t), &depth)?;
        netpbm::write_pgm(&labels_path(&dir, t), &labels)?;
    }
    Ok(clip)
}

/// Deterministic per-clip seed.
fn clip_seed(seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng.random()
}

/// Writes the balanced design (16 main clips plus 8 practice clips) and its `catalog.json`.
pub fn generate_synthetic_catalog(root: &Path, seed: u64, opts: &SynthOptions) -> Result<StimulusCatalog, DatasetError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut clips = Vec::new();
    let mut k = 0;
    for (prefix, per_cat, practice) in
        [("clip", PAPER_CLIPS_PER_CATEGORY, false), ("practice", PAPER_PRACTICE_COUNT / Category::ALL.len(), true)]
    {
        for cat in Category::ALL {
            for i in 0..per_cat {
                let id = format!("{prefix}_{}_{i}", cat.name().to_lowercase());
                let mut clip = generate_synthetic_clip(root, &id, cat, clip_seed(seed, k), opts)?;
                clip.practice = practice;
                clips.push(clip);
                k += 1;
            }
        }
    }
    let catalog = StimulusCatalog::new(clips, root)?;
    save_catalog(&catalog, &root.join("catalog.json"))?;
    Ok(catalog)
}

/// Fraction of frames whose label map shows every target the category promises (and none other).
pub fn label_agreement(dir: &Path, clip: &StimulusClip) -> Result<f64, DatasetError> {
    let n = clip.frame_count();
    let mut good = 0;
    for i in 0..n {
        let labels = netpbm::read_pgm(&labels_path(dir, i))?;
        if GroundTruth::from_labels(labels.iter()) == clip.ground_truth() {
            good += 1;
        }
    }
    Ok(good as f64 / n as f64)
}

/// Bounding boxes `(r0, r1, c0, c1)` (half open) of each 4-connected object region.
pub fn object_boxes(labels: &Array2<u8>) -> Vec<(usize, usize, usize, usize)> {
    let (h, w) = labels.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut boxes = Vec::new();
    for ((r, c), &l) in labels.indexed_iter() {
        if !is_object_label(l) || seen[[r, c]] {
            continue;
        }
        let mut b = (r, r + 1, c, c + 1);
        let mut stack = vec![(r, c)];
        seen[[r, c]] = true;
        while let Some((y, x)) = stack.pop() {
            b = (b.0.min(y), b.1.max(y + 1), b.2.min(x), b.3.max(x + 1));
            let ns = [(y.wrapping_sub(1), x), (y + 1, x), (y, x.wrapping_sub(1)), (y, x + 1)];
            for (ny, nx) in ns {
                if ny < h && nx < w && !seen[[ny, nx]] && labels[[ny, nx]] == l {
                    seen[[ny, nx]] = true;
                    stack.push((ny, nx));
                }
            }
        }
        boxes.push(b);
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthOptions {
        SynthOptions { fps: 2.0, duration_s: 5.0, width: 64, height: 48 }
    }

    fn clip(id: &str, cat: Category) -> StimulusClip {
        StimulusClip {
            clip_id: id.into(),
            dir: id.into(),
            fps: 2.0,
            duration_s: 5.0,
            category: cat,
            has_people: cat.has_people(),
            has_cars: cat.has_cars(),
            practice: false,
        }
    }

    fn sixteen() -> Vec<StimulusClip> {
        Category::ALL.iter().flat_map(|&c| (0..4).map(move |i| clip(&format!("{}{i}", c.name()), c))).collect()
    }

    #[test]
    fn category_truth_roundtrip() {
        for c in Category::ALL {
            assert_eq!(Category::from_truth(c.has_people(), c.has_cars()), c);
        }
    }

    #[test]
    fn balanced_manifest_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cat = StimulusCatalog::new(sixteen(), dir.path()).unwrap();
        assert!(cat.balanced);
        let path = dir.path().join("catalog.json");
        save_catalog(&cat, &path).unwrap();
        let back = load_catalog(&path, LoadOptions { paper_design: true, check_frames: false }).unwrap();
        assert_eq!(back, cat);
        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<_> = v["clips"][0].as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 7, "{keys:?}");
    }

    #[test]
    fn fifteen_clips_are_imbalanced() {
        let dir = tempfile::tempdir().unwrap();
        let mut clips = sixteen();
        clips.pop();
        let cat = StimulusCatalog::new(clips, dir.path()).unwrap();
        assert!(!cat.balanced);
        let path = dir.path().join("catalog.json");
        save_catalog(&cat, &path).unwrap();
        let opts = LoadOptions { paper_design: true, check_frames: false };
        assert!(matches!(load_catalog(&path, opts), Err(DatasetError::CategoryImbalance(_))));
        assert!(load_catalog(&path, LoadOptions { paper_design: false, ..opts }).is_ok());
    }

    #[test]
    fn inconsistent_category_is_rejected() {
        let mut c = clip("x", Category::C);
        c.has_people = true;
        assert!(matches!(StimulusCatalog::new(vec![c], "."), Err(DatasetError::InvalidClip { .. })));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        fs::write(&path, "{\"clips\": [").unwrap();
        assert!(matches!(load_catalog(&path, LoadOptions::default()), Err(DatasetError::ManifestParse { .. })));
        assert!(StimulusCatalog::new(vec![clip("a", Category::N), clip("a", Category::N)], ".").is_err());
    }

    #[test]
    fn missing_frames_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate_synthetic_clip(dir.path(), "n0", Category::N, 1, &small()).unwrap();
        fs::remove_file(frame_path(&dir.path().join("n0"), 3).unwrap()).unwrap();
        let cat = StimulusCatalog::new(vec![c], dir.path()).unwrap();
        let path = dir.path().join("catalog.json");
        save_catalog(&cat, &path).unwrap();
        let r = load_catalog(&path, LoadOptions { paper_design: false, check_frames: true });
        assert!(matches!(r, Err(DatasetError::MissingFrames { .. })), "{r:?}");
    }

    #[test]
    fn synthetic_labels_match_category() {
        let dir = tempfile::tempdir().unwrap();
        for (k, cat) in Category::ALL.into_iter().enumerate() {
            let c = generate_synthetic_clip(dir.path(), cat.name(), cat, 40 + k as u64, &small()).unwrap();
            let d = dir.path().join(&c.dir);
            assert_eq!(c.frame_count(), 10);
            if cat == Category::N {
                for i in 0..10 {
                    let l = netpbm::read_pgm(&labels_path(&d, i)).unwrap();
                    assert!(l.iter().all(|v| [0, 10, 11].contains(v)));
                }
            }
            assert!(label_agreement(&d, &c).unwrap() >= 0.9, "{cat:?}");
            let f = load_frame(&d, 0).unwrap();
            let aux = load_aux(&d, 0).unwrap();
            aux.validate(f.dim()).unwrap();
            // objects are nearer than the ground under them
            let (depth, labels) = (aux.depth.unwrap(), aux.labels.unwrap());
            for ((r, c), &l) in labels.indexed_iter() {
                if is_object_label(l) {
                    assert!(depth[[r, c]] < FAR_DEPTH);
                }
            }
        }
    }

    #[test]
    fn object_shapes_follow_category() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions { fps: 1.0, ..Default::default() };
        for seed in 0..6 {
            let c = generate_synthetic_clip(dir.path(), "cp", Category::CP, seed, &opts).unwrap();
            let labels = netpbm::read_pgm(&labels_path(&dir.path().join(&c.dir), 0)).unwrap();
            for (r0, r1, c0, c1) in object_boxes(&labels) {
                let kind = labels[[r0, (c0..c1).find(|&c| is_object_label(labels[[r0, c]])).unwrap()]];
                // occluded objects are not rectangles; only check unoccluded ones
                let full = (r0..r1).all(|r| (c0..c1).all(|c| labels[[r, c]] == kind));
                let aspect = (c1 - c0) as f64 / (r1 - r0) as f64;
                if full && kind == LABEL_CAR {
                    assert!(aspect >= 1.8, "car aspect {aspect}");
                }
                if full && kind == LABEL_PERSON {
                    assert!(aspect <= 0.6, "person aspect {aspect}");
                }
            }
        }
    }

    #[test]
    fn fallback_saliency_concentrates_on_objects() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions { fps: 1.0, ..Default::default() };
        for (k, cat) in [Category::C, Category::CP, Category::P].into_iter().enumerate() {
            let c = generate_synthetic_clip(dir.path(), cat.name(), cat, 100 + k as u64, &opts).unwrap();
            let d = dir.path().join(&c.dir);
            for i in 0..c.frame_count() {
                let aux = load_aux(&d, i).unwrap();
                let (sal, labels) = (aux.saliency.unwrap(), aux.labels.unwrap());
                let (h, w) = labels.dim();
                let mut near = Array2::from_elem((h, w), false);
                for (r0, r1, c0, c1) in object_boxes(&labels) {
                    // box doubled about its center
                    let (hh, hw) = ((r1 - r0) / 2 + 1, (c1 - c0) / 2 + 1);
                    near.slice_mut(ndarray::s![r0.saturating_sub(hh)..(r1 + hh).min(h), c0.saturating_sub(hw)..(c1 + hw).min(w)]).fill(true);
                }
                let total: f64 = sal.sum();
                let inside: f64 = sal.iter().zip(&near).filter(|p| *p.1).map(|p| p.0).sum();
                assert!(inside / total > 0.6, "{cat:?} frame {i}: {}", inside / total);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic_clip(a.path(), "x", Category::CP, 5, &small()).unwrap();
        generate_synthetic_clip(b.path(), "x", Category::CP, 5, &small()).unwrap();
        for i in 0..10 {
            for p in [numbered(Path::new("x"), "frame", i, "pgm"), saliency_path(Path::new("x"), i), depth_path(Path::new("x"), i), labels_path(Path::new("x"), i)] {
                assert_eq!(fs::read(a.path().join(&p)).unwrap(), fs::read(b.path().join(&p)).unwrap());
            }
        }
    }

    #[test]
    fn synthetic_catalog_is_paper_design() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions { fps: 0.4, ..small() };
        let cat = generate_synthetic_catalog(dir.path(), 3, &opts).unwrap();
        assert!(cat.balanced);
        assert_eq!(cat.practice_clips().count(), 8);
        let loaded = load_catalog(&dir.path().join("catalog.json"), LoadOptions::default()).unwrap();
        assert_eq!(loaded, cat);
    }
}
