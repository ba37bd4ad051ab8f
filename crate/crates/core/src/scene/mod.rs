//! Scene simplification: four ways of turning a video frame and its auxiliary
//! maps into a grayscale stimulus image, and the image-to-amplitude encoding.

mod encode;
mod saliency;

pub use encode::encode_amplitudes;
pub use saliency::{fallback_saliency, local_contrast};

use ndarray::{Array2, Array3, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest accepted frame side, in pixels.
pub const MIN_FRAME_SIDE: usize = 32;

/// Rec. 601 luma weights for R, G, B.
pub const REC601_LUMA: [f64; 3] = [0.299, 0.587, 0.114];

pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_PERSON: u8 = 1;
pub const LABEL_BICYCLE: u8 = 2;
pub const LABEL_CAR: u8 = 3;
pub const LABEL_BUS: u8 = 4;
pub const LABEL_ROAD: u8 = 10;
pub const LABEL_SIDEWALK: u8 = 11;
pub const LABEL_SET: [u8; 7] = [0, 1, 2, 3, 4, 10, 11];

/// Person, bicycle, car or bus.
#[inline]
pub fn is_object_label(l: u8) -> bool {
    matches!(l, LABEL_PERSON | LABEL_BICYCLE | LABEL_CAR | LABEL_BUS)
}

#[inline]
fn is_ground_label(l: u8) -> bool {
    l == LABEL_ROAD || l == LABEL_SIDEWALK
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("strategy needs the {0} map but it is missing")]
    MissingAuxMap(AuxKind),
    #[error("{map} map is {got:?} but the frame is {expected:?}")]
    ShapeMismatch { map: AuxKind, expected: (usize, usize), got: (usize, usize) },
    #[error("invalid {map} map: {msg}")]
    InvalidAuxMap { map: AuxKind, msg: String },
    #[error("frame is {height}x{width}, both sides must be at least {MIN_FRAME_SIDE}")]
    FrameTooSmall { height: usize, width: usize },
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    Saliency,
    Depth,
    Labels,
}

impl std::fmt::Display for AuxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AuxKind::Saliency => "saliency",
            AuxKind::Depth => "depth",
            AuxKind::Labels => "labels",
        })
    }
}

/// Scene simplification strategy; also the provenance of a [`GrayFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Saliency,
    Depth,
    Segmentation,
    Combination,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Saliency, Strategy::Depth, Strategy::Segmentation, Strategy::Combination];

    pub fn required_maps(self) -> &'static [AuxKind] {
        match self {
            Strategy::Saliency => &[AuxKind::Saliency],
            Strategy::Depth => &[AuxKind::Depth],
            Strategy::Segmentation => &[AuxKind::Labels],
            Strategy::Combination => &[AuxKind::Saliency, AuxKind::Depth, AuxKind::Labels],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Saliency => "saliency",
            Strategy::Depth => "depth",
            Strategy::Segmentation => "segmentation",
            Strategy::Combination => "combination",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}; expected saliency, depth, segmentation or combination"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    Gray(Array2<u8>),
    /// `height x width x 3`
    Rgb(Array3<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrame {
    pixels: Pixels,
    pub frame_index: u64,
}

impl VideoFrame {
    pub fn new(pixels: Pixels, frame_index: u64) -> Result<Self, SceneError> {
        let (height, width) = match &pixels {
            Pixels::Gray(a) => a.dim(),
            Pixels::Rgb(a) => {
                let (h, w, c) = a.dim();
                if c != 3 {
                    return Err(SceneError::InvalidParams(format!("RGB frame has {c} channels")));
                }
                (h, w)
            }
        };
        if height < MIN_FRAME_SIDE || width < MIN_FRAME_SIDE {
            return Err(SceneError::FrameTooSmall { height, width });
        }
        Ok(Self { pixels, frame_index })
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    /// `(height, width)`
    pub fn dim(&self) -> (usize, usize) {
        match &self.pixels {
            Pixels::Gray(a) => a.dim(),
            Pixels::Rgb(a) => (a.dim().0, a.dim().1),
        }
    }

    /// Gray level in [0, 255]; RGB frames use Rec. 601 luma.
    pub fn luma(&self) -> Array2<f64> {
        match &self.pixels {
            Pixels::Gray(a) => a.mapv(f64::from),
            Pixels::Rgb(a) => {
                let (h, w, _) = a.dim();
                Array2::from_shape_fn((h, w), |(r, c)| {
                    REC601_LUMA[0] * a[[r, c, 0]] as f64
                        + REC601_LUMA[1] * a[[r, c, 1]] as f64
                        + REC601_LUMA[2] * a[[r, c, 2]] as f64
                })
            }
        }
    }
}

/// Per-pixel side information produced by external models (or the synthetic generator).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxMaps {
    /// Importance in [0, 1].
    pub saliency: Option<Array2<f64>>,
    /// Relative depth, larger is farther.
    pub depth: Option<Array2<f64>>,
    /// Class ids from [`LABEL_SET`].
    pub labels: Option<Array2<u8>>,
}

impl AuxMaps {
    pub fn validate(&self, dim: (usize, usize)) -> Result<(), SceneError> {
        fn shape<T>(map: AuxKind, a: &Array2<T>, expected: (usize, usize)) -> Result<(), SceneError> {
            if a.dim() != expected {
                return Err(SceneError::ShapeMismatch { map, expected, got: a.dim() });
            }
            Ok(())
        }
        if let Some(s) = &self.saliency {
            shape(AuxKind::Saliency, s, dim)?;
            if let Some(v) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(SceneError::InvalidAuxMap { map: AuxKind::Saliency, msg: format!("value {v} outside [0, 1]") });
            }
        }
        if let Some(d) = &self.depth {
            shape(AuxKind::Depth, d, dim)?;
            if let Some(v) = d.iter().find(|v| !v.is_finite()) {
                return Err(SceneError::InvalidAuxMap { map: AuxKind::Depth, msg: format!("non-finite value {v}") });
            }
        }
        if let Some(l) = &self.labels {
            shape(AuxKind::Labels, l, dim)?;
            if let Some(v) = l.iter().find(|v| !LABEL_SET.contains(*v)) {
                return Err(SceneError::InvalidAuxMap { map: AuxKind::Labels, msg: format!("unknown class id {v}") });
            }
        }
        Ok(())
    }

    fn saliency(&self) -> Result<&Array2<f64>, SceneError> {
        self.saliency.as_ref().ok_or(SceneError::MissingAuxMap(AuxKind::Saliency))
    }

    fn depth(&self) -> Result<&Array2<f64>, SceneError> {
        self.depth.as_ref().ok_or(SceneError::MissingAuxMap(AuxKind::Depth))
    }

    fn labels(&self) -> Result<&Array2<u8>, SceneError> {
        self.labels.as_ref().ok_or(SceneError::MissingAuxMap(AuxKind::Labels))
    }
}

/// Stimulus image in [0, 255] before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pixels: Array2<f64>,
    pub provenance: Strategy,
    pub frame_index: u64,
}

impl GrayFrame {
    pub fn new(pixels: Array2<f64>, provenance: Strategy, frame_index: u64) -> Result<Self, SceneError> {
        if pixels.is_empty() {
            return Err(SceneError::InvalidParams("gray frame is empty".into()));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(SceneError::InvalidParams(format!("gray value {v} outside [0, 255]")));
        }
        Ok(Self { pixels, provenance, frame_index })
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }
}

/// Linear-interpolation percentile (`q` in [0, 100]) of non-empty data.
pub fn percentile(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    assert!(!v.is_empty(), "percentile of empty data");
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (v[hi] - v[lo]) * frac
    }
}

/// How the combination strategy turns raw depth into brightness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationDepth {
    /// `y = -45/16 (8/(dmax-dmin) x - 16/(dmax-dmin))^2 + 180` on raw depth `x`, clipped to [0, 180].
    #[default]
    Literal,
    /// `y = 180 (1 - t^2)` with `t = (x - dmin)/(dmax - dmin)`.
    Normalized,
}

/// Parameters of every strategy; only the selected strategy's fields matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub strategy: Strategy,
    /// `k` of the depth mapping.
    pub decay_rate: f64,
    /// Depth values above this percentile are removed.
    pub depth_percentile: f64,
    /// Saliency at or above this percentile enters the combination mask.
    pub saliency_percentile: f64,
    pub combination_depth: CombinationDepth,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Segmentation,
            decay_rate: 2.0,
            depth_percentile: 80.0,
            saliency_percentile: 90.0,
            combination_depth: CombinationDepth::Literal,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return Err(SceneError::InvalidParams(format!("decay_rate must be > 0, got {}", self.decay_rate)));
        }
        for (name, q) in [("depth_percentile", self.depth_percentile), ("saliency_percentile", self.saliency_percentile)] {
            if !(0.0..=100.0).contains(&q) {
                return Err(SceneError::InvalidParams(format!("{name} must be in [0, 100], got {q}")));
            }
        }
        Ok(())
    }
}

fn checked(frame: &VideoFrame, aux: &AuxMaps) -> Result<(), SceneError> {
    aux.validate(frame.dim())
}

/// Runs the configured strategy.
pub fn apply_strategy(frame: &VideoFrame, aux: &AuxMaps, cfg: &SceneConfig) -> Result<GrayFrame, SceneError> {
    cfg.validate()?;
    checked(frame, aux)?;
    let pixels = match cfg.strategy {
        Strategy::Saliency => saliency_gray(aux.saliency()?),
        Strategy::Depth => depth_gray(aux.depth()?, cfg.decay_rate, cfg.depth_percentile),
        Strategy::Segmentation => segmentation_gray(aux.labels()?),
        Strategy::Combination => combination_gray(
            aux.saliency()?,
            aux.depth()?,
            aux.labels()?,
            cfg.saliency_percentile,
            cfg.combination_depth,
        ),
    };
    Ok(GrayFrame { pixels, provenance: cfg.strategy, frame_index: frame.frame_index })
}

pub fn strategy_saliency(frame: &VideoFrame, aux: &AuxMaps) -> Result<GrayFrame, SceneError> {
    apply_strategy(frame, aux, &SceneConfig { strategy: Strategy::Saliency, ..Default::default() })
}

pub fn strategy_depth(frame: &VideoFrame, aux: &AuxMaps, decay_rate: f64) -> Result<GrayFrame, SceneError> {
    apply_strategy(frame, aux, &SceneConfig { strategy: Strategy::Depth, decay_rate, ..Default::default() })
}

pub fn strategy_segmentation(frame: &VideoFrame, aux: &AuxMaps) -> Result<GrayFrame, SceneError> {
    apply_strategy(frame, aux, &SceneConfig { strategy: Strategy::Segmentation, ..Default::default() })
}

pub fn strategy_combination(frame: &VideoFrame, aux: &AuxMaps) -> Result<GrayFrame, SceneError> {
    apply_strategy(frame, aux, &SceneConfig { strategy: Strategy::Combination, ..Default::default() })
}

/// `255 * s`, nothing else.
pub fn saliency_gray(saliency: &Array2<f64>) -> Array2<f64> {
    saliency.mapv(|s| 255.0 * s)
}

/// Depth mapping for a single map: values beyond the `cut_percentile` are
/// removed (0) and the rest decay exponentially from 180 at the nearest depth
/// to exactly 0 at the cutoff:
///
/// `g(d) = 180 (exp(-k (d - dmin)/(dcut - dmin)) - exp(-k)) / (1 - exp(-k))`
///
/// If the cutoff equals the nearest depth every retained pixel is 180.
pub fn depth_gray(depth: &Array2<f64>, k: f64, cut_percentile: f64) -> Array2<f64> {
    let d_min = depth.iter().copied().fold(f64::INFINITY, f64::min);
    let d_cut = percentile(depth.iter().copied(), cut_percentile);
    if d_cut == d_min {
        log::warn!("degenerate depth map (cutoff equals nearest depth {d_min}); retained pixels set to 180");
        return depth.mapv(|d| if d <= d_cut { 180.0 } else { 0.0 });
    }
    let floor = (-k).exp();
    let span = d_cut - d_min;
    depth.mapv(|d| {
        if d > d_cut {
            0.0
        } else {
            (180.0 * ((-k * (d - d_min) / span).exp() - floor) / (1.0 - floor)).clamp(0.0, 180.0)
        }
    })
}

/// Object masks if any object is present, otherwise the 4-connected outline of road and sidewalk regions.
pub fn segmentation_gray(labels: &Array2<u8>) -> Array2<f64> {
    if labels.iter().any(|&l| is_object_label(l)) {
        return labels.mapv(|l| if is_object_label(l) { 255.0 } else { 0.0 });
    }
    ground_edges(labels).mapv(|e| if e { 255.0 } else { 0.0 })
}

/// Road or sidewalk pixels with at least one 4-neighbor of a different class.
pub fn ground_edges(labels: &Array2<u8>) -> Array2<bool> {
    let (h, w) = labels.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let l = labels[[r, c]];
        if !is_ground_label(l) {
            return false;
        }
        (r > 0 && labels[[r - 1, c]] != l)
            || (r + 1 < h && labels[[r + 1, c]] != l)
            || (c > 0 && labels[[r, c - 1]] != l)
            || (c + 1 < w && labels[[r, c + 1]] != l)
    })
}

/// Mask of the combination strategy: salient pixels (ties at the threshold included) or objects.
pub fn combination_mask(saliency: &Array2<f64>, labels: &Array2<u8>, saliency_percentile: f64) -> Array2<bool> {
    let threshold = percentile(saliency.iter().copied(), saliency_percentile);
    let mut mask = Array2::from_elem(saliency.dim(), false);
    Zip::from(&mut mask).and(saliency).and(labels).for_each(|m, &s, &l| *m = s >= threshold || is_object_label(l));
    mask
}

/// Brightness of a masked pixel at raw depth `x`, clipped to [0, 180].
///
/// A flat depth map (`d_max == d_min`) has no scale, so every masked pixel gets 180.
pub fn combination_brightness(x: f64, d_min: f64, d_max: f64, form: CombinationDepth) -> f64 {
    let range = d_max - d_min;
    if range == 0.0 {
        return 180.0;
    }
    let y = match form {
        CombinationDepth::Literal => {
            let u = 8.0 / range * x - 16.0 / range;
            -45.0 / 16.0 * u * u + 180.0
        }
        CombinationDepth::Normalized => {
            let t = (x - d_min) / range;
            180.0 * (1.0 - t * t)
        }
    };
    y.clamp(0.0, 180.0)
}

pub fn combination_gray(
    saliency: &Array2<f64>,
    depth: &Array2<f64>,
    labels: &Array2<u8>,
    saliency_percentile: f64,
    form: CombinationDepth,
) -> Array2<f64> {
    let mask = combination_mask(saliency, labels, saliency_percentile);
    let d_min = depth.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = depth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Array2::zeros(depth.dim());
    Zip::from(&mut out).and(&mask).and(depth).for_each(|o, &m, &x| {
        if m {
            *o = combination_brightness(x, d_min, d_max, form);
        }
    });
    out
}
