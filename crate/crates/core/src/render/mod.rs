//! Axon-map phosphene rendering.
//!
//! A percept pixel stands for the ganglion cell whose soma sits at that pixel's
//! retinal position. Its brightness is the strongest activation anywhere
//! along its axon:
//!
//! `b(p) = clip01( max_seg  axonal(l(seg)) * sum_e amp(e) * spatial(|seg - e|) )`
//!
//! where `l` is the path length from the soma, `spatial` decays with width
//! `rho` and `axonal` with width `lambda` (Gaussian form by default). With
//! `lambda = 0` only the soma itself contributes.
//!
//! [`oracle`] evaluates this literally. [`table`] precomputes the axonal
//! weights per pixel once and [`fast`] evaluates frames against that table.

pub mod fast;
pub mod moments;
pub mod oracle;
pub mod table;

use crate::retina::{BundleModelConfig, PerceptGrid, PerceptGridSpec, Point, RetinaError, RetinalCoordinateFrame};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fast::{render_fast, render_fast_with, render_video, render_video_with};
pub use moments::{moment_ellipse, MomentEllipse};
pub use oracle::{render_oracle, render_oracle_with};
pub use table::{build_sensitivity_table, build_sensitivity_table_with, FieldSampling, SensitivityTable, TableOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("amplitude frame is {got_rows}x{got_cols} but the electrode grid is {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got_rows: usize, got_cols: usize },
    #[error("sensitivity table was built for different parameters: {0}")]
    TableMismatch(String),
    #[error("invalid render parameters: {0}")]
    InvalidParams(String),
    #[error("amplitude {value} at index {index} is outside [0, 1]")]
    InvalidAmplitude { index: usize, value: f64 },
    #[error(transparent)]
    Retina(#[from] RetinaError),
}

/// Functional form of both decay factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    /// `exp(-d^2 / (2 c^2))`
    #[default]
    Gaussian,
    /// `exp(-d / c)`
    Exponential,
}

/// Axon-map model parameters, in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxonMapParams {
    pub rho_um: f64,
    pub lambda_um: f64,
    #[serde(default)]
    pub decay: DecayForm,
}

pub const PAPER_RHO_UM: [f64; 3] = [100.0, 300.0, 500.0];
pub const PAPER_LAMBDA_UM: [f64; 3] = [0.0, 1000.0, 5000.0];
pub const PAPER_GRID_SIZES: [usize; 3] = [8, 16, 32];

impl AxonMapParams {
    pub fn new(rho_um: f64, lambda_um: f64) -> Result<Self, RenderError> {
        let p = Self { rho_um, lambda_um, decay: DecayForm::Gaussian };
        p.validate()?;
        Ok(p)
    }

    pub fn with_decay(mut self, decay: DecayForm) -> Self {
        self.decay = decay;
        self
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.rho_um > 0.0 && self.rho_um.is_finite()) {
            return Err(RenderError::InvalidParams(format!("rho must be > 0, got {}", self.rho_um)));
        }
        if !(self.lambda_um >= 0.0 && self.lambda_um.is_finite()) {
            return Err(RenderError::InvalidParams(format!("lambda must be >= 0, got {}", self.lambda_um)));
        }
        Ok(())
    }

    /// The nine (rho, lambda) conditions of the experiment, rho-major.
    pub fn paper_cells() -> Vec<AxonMapParams> {
        PAPER_RHO_UM
            .iter()
            .flat_map(|&rho| PAPER_LAMBDA_UM.iter().map(move |&lambda| AxonMapParams {
                rho_um: rho,
                lambda_um: lambda,
                decay: DecayForm::Gaussian,
            }))
            .collect()
    }

    /// Spatial factor for a squared distance from an electrode.
    #[inline]
    pub fn spatial(&self, dist_sq: f64) -> f64 {
        match self.decay {
            DecayForm::Gaussian => (-dist_sq / (2.0 * self.rho_um * self.rho_um)).exp(),
            DecayForm::Exponential => (-dist_sq.sqrt() / self.rho_um).exp(),
        }
    }

    /// Axonal factor for a path length from the soma.
    #[inline]
    pub fn axonal(&self, path_len: f64) -> f64 {
        if self.lambda_um == 0.0 {
            return if path_len == 0.0 { 1.0 } else { 0.0 };
        }
        match self.decay {
            DecayForm::Gaussian => (-path_len * path_len / (2.0 * self.lambda_um * self.lambda_um)).exp(),
            DecayForm::Exponential => (-path_len / self.lambda_um).exp(),
        }
    }
}

/// Retinal anatomy shared by every renderer: the coordinate frame plus the bundle model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Retina {
    pub frame: RetinalCoordinateFrame,
    pub bundles: BundleModelConfig,
}

impl Retina {
    pub fn validate(&self) -> Result<(), RetinaError> {
        self.frame.validate()?;
        self.bundles.validate()
    }
}

/// Rectangular electrode array, positions row-major with row 0 superior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElectrodeGridSpec", into = "ElectrodeGridSpec")]
pub struct ElectrodeGrid {
    pub rows: usize,
    pub cols: usize,
    pub pitch_um: f64,
    pub center: Point,
    positions: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub pitch_um: f64,
    pub center: Point,
}

impl TryFrom<ElectrodeGridSpec> for ElectrodeGrid {
    type Error = RenderError;

    fn try_from(s: ElectrodeGridSpec) -> Result<Self, Self::Error> {
        ElectrodeGrid::new(s.rows, s.cols, s.pitch_um, s.center)
    }
}

impl From<ElectrodeGrid> for ElectrodeGridSpec {
    fn from(g: ElectrodeGrid) -> Self {
        ElectrodeGridSpec { rows: g.rows, cols: g.cols, pitch_um: g.pitch_um, center: g.center }
    }
}

/// Side length spanned by every default array, so the three resolutions cover the same retina.
pub const DEFAULT_ARRAY_SPAN_UM: f64 = 6000.0;

impl ElectrodeGrid {
    pub fn new(rows: usize, cols: usize, pitch_um: f64, center: Point) -> Result<Self, RenderError> {
        if rows == 0 || cols == 0 {
            return Err(RenderError::InvalidParams("electrode grid needs at least one electrode".into()));
        }
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(RenderError::InvalidParams(format!("pitch must be > 0, got {pitch_um}")));
        }
        let r_mid = (rows - 1) as f64 / 2.0;
        let c_mid = (cols - 1) as f64 / 2.0;
        let positions = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| {
                    Point::new(center.x + (c as f64 - c_mid) * pitch_um, center.y + (r_mid - r as f64) * pitch_um)
                })
            })
            .collect();
        Ok(Self { rows, cols, pitch_um, center, positions })
    }

    /// `n x n` grid centered on the fovea spanning [`DEFAULT_ARRAY_SPAN_UM`].
    pub fn square(n: usize) -> Result<Self, RenderError> {
        if n < 2 {
            return Err(RenderError::InvalidParams("a square array needs n >= 2".into()));
        }
        Self::new(n, n, DEFAULT_ARRAY_SPAN_UM / (n - 1) as f64, Point::new(0.0, 0.0))
    }

    /// A lone electrode, for calibration renders.
    pub fn single(at: Point) -> Self {
        Self { rows: 1, cols: 1, pitch_um: 1.0, center: at, positions: vec![at] }
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Electrode x coordinates by column.
    pub fn column_xs(&self) -> Vec<f64> {
        (0..self.cols).map(|c| self.positions[c].x).collect()
    }

    /// Electrode y coordinates by row.
    pub fn row_ys(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.positions[r * self.cols].y).collect()
    }

    /// True for the square 8/16/32 arrays used in the experiment.
    pub fn is_paper_configuration(&self) -> bool {
        self.rows == self.cols && PAPER_GRID_SIZES.contains(&self.rows)
    }
}

/// Normalized current amplitudes for one video frame, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFrame {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub frame_index: u64,
    pub timestamp_ms: f64,
}

impl AmplitudeFrame {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, RenderError> {
        if values.len() != rows * cols {
            return Err(RenderError::InvalidParams(format!(
                "{} amplitudes for a {rows}x{cols} grid",
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(RenderError::InvalidAmplitude { index, value });
        }
        Ok(Self { rows, cols, values, frame_index: 0, timestamp_ms: 0.0 })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols], frame_index: 0, timestamp_ms: 0.0 }
    }

    pub fn with_index(mut self, frame_index: u64, timestamp_ms: f64) -> Self {
        self.frame_index = frame_index;
        self.timestamp_ms = timestamp_ms;
        self
    }

    pub fn check_shape(&self, grid: &ElectrodeGrid) -> Result<(), RenderError> {
        if self.rows != grid.rows || self.cols != grid.cols || self.values.len() != grid.len() {
            return Err(RenderError::ShapeMismatch {
                rows: grid.rows,
                cols: grid.cols,
                got_rows: self.rows,
                got_cols: self.cols,
            });
        }
        Ok(())
    }
}

/// Rendered brightness in [0, 1], row-major over a [`PerceptGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptFrame {
    pub width: usize,
    pub height: usize,
    pub brightness: Vec<f64>,
    pub grid: PerceptGridSpec,
    pub frame_index: u64,
}

impl PerceptFrame {
    /// Clips raw activations into a frame.
    pub fn from_response(grid: &PerceptGrid, raw: &[f64], frame_index: u64) -> Self {
        Self {
            width: grid.width,
            height: grid.height,
            brightness: raw.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            grid: grid.spec(),
            frame_index,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.brightness[row * self.width + col]
    }

    pub fn max_abs_diff(&self, other: &PerceptFrame) -> f64 {
        self.brightness
            .iter()
            .zip(&other.brightness)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_w_min(w_min: f64) -> Result<(), RenderError> {
    if w_min > 0.0 && w_min < 1.0 {
        Ok(())
    } else {
        Err(RenderError::InvalidParams(format!("w_min must be in (0, 1), got {w_min}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_grid_geometry() {
        for n in PAPER_GRID_SIZES {
            let g = ElectrodeGrid::square(n).unwrap();
            assert!(g.is_paper_configuration());
            assert_eq!(g.len(), n * n);
            let xs = g.column_xs();
            assert!((xs[0] + 3000.0).abs() < 1e-9 && (xs[n - 1] - 3000.0).abs() < 1e-9);
            let ys = g.row_ys();
            assert!(ys[0] > ys[n - 1]);
            let mean_x: f64 = g.positions().iter().map(|p| p.x).sum::<f64>() / g.len() as f64;
            assert!(mean_x.abs() < 1e-9);
        }
        assert!(!ElectrodeGrid::new(4, 6, 100.0, Point::default()).unwrap().is_paper_configuration());
    }

    #[test]
    fn amplitude_validation() {
        assert!(AmplitudeFrame::new(2, 2, vec![0.0, 1.0, 0.5, 0.25]).is_ok());
        assert!(matches!(
            AmplitudeFrame::new(1, 2, vec![0.0, 1.5]),
            Err(RenderError::InvalidAmplitude { index: 1, .. })
        ));
        assert!(AmplitudeFrame::new(2, 2, vec![0.0; 3]).is_err());
        let g = ElectrodeGrid::square(8).unwrap();
        assert!(matches!(AmplitudeFrame::zeros(16, 16).check_shape(&g), Err(RenderError::ShapeMismatch { .. })));
    }

    #[test]
    fn params_and_factors() {
        assert!(AxonMapParams::new(0.0, 10.0).is_err());
        assert!(AxonMapParams::new(10.0, -1.0).is_err());
        let p = AxonMapParams::new(100.0, 0.0).unwrap();
        assert_eq!(p.axonal(0.0), 1.0);
        assert_eq!(p.axonal(1e-9), 0.0);
        let p = AxonMapParams::new(100.0, 1000.0).unwrap();
        assert!((p.axonal(2000.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((p.spatial(100.0 * 100.0) - (-0.5f64).exp()).abs() < 1e-15);
        let e = p.with_decay(DecayForm::Exponential);
        assert!((e.axonal(1000.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(AxonMapParams::paper_cells().len(), 9);
    }

    #[test]
    fn grid_json_roundtrip() {
        let g = ElectrodeGrid::square(16).unwrap();
        let back: ElectrodeGrid = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }
}
