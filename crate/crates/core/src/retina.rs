//! Retinal geometry and nerve-fiber-bundle trajectories.
//!
//! Coordinates are retinal micrometers for a right eye with the fovea at the
//! origin, `+x` nasal (toward the optic disc) and `+y` superior. The horizontal
//! line through the fovea and the disc center is the meridian; temporal to the
//! fovea it is the raphe that bundles never cross.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetinaError {
    #[error("soma ({x:.1}, {y:.1}) um lies inside the optic disc")]
    SomaInsideDisc { x: f64, y: f64 },
    #[error("soma ({x:.1}, {y:.1}) um lies outside the modeled retina")]
    OutOfExtent { x: f64, y: f64 },
    #[error("segment index {index} out of range for bundle of {len} segments")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bad percept extent: {0}")]
    BadExtent(String),
    #[error("invalid retinal frame: {0}")]
    InvalidFrame(String),
    #[error("invalid bundle model: {0}")]
    InvalidModel(String),
}

/// A point on the retina, in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn mirrored(self) -> Point {
        Point::new(self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Eye {
    #[default]
    RightEye,
}

/// Anatomical frame of the simulated retina.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetinalCoordinateFrame {
    pub eye: Eye,
    pub optic_disc_center: Point,
    pub disc_radius_um: f64,
    pub um_per_degree: f64,
    /// Somata farther than this from the fovea are outside the model.
    pub max_eccentricity_um: f64,
}

impl Default for RetinalCoordinateFrame {
    fn default() -> Self {
        Self {
            eye: Eye::RightEye,
            optic_disc_center: Point::new(4200.0, 0.0),
            disc_radius_um: 900.0,
            um_per_degree: 280.0,
            max_eccentricity_um: 15_000.0,
        }
    }
}

impl RetinalCoordinateFrame {
    pub fn validate(&self) -> Result<(), RetinaError> {
        if !(self.um_per_degree > 0.0) {
            return Err(RetinaError::InvalidFrame("um_per_degree must be > 0".into()));
        }
        if !(self.optic_disc_center.x > 0.0) {
            return Err(RetinaError::InvalidFrame(
                "optic disc must lie nasal (+x) of the fovea".into(),
            ));
        }
        if !(self.disc_radius_um > 0.0 && self.disc_radius_um < self.optic_disc_center.x) {
            return Err(RetinaError::InvalidFrame(
                "disc radius must be positive and must not cover the fovea".into(),
            ));
        }
        if !(self.max_eccentricity_um > self.optic_disc_center.x + self.disc_radius_um) {
            return Err(RetinaError::InvalidFrame("max eccentricity must enclose the disc".into()));
        }
        Ok(())
    }

    pub fn fovea(&self) -> Point {
        Point::new(0.0, 0.0)
    }

    pub fn inside_disc(&self, p: Point) -> bool {
        p.dist(self.optic_disc_center) <= self.disc_radius_um
    }

    pub fn in_extent(&self, p: Point) -> bool {
        p.x.is_finite() && p.y.is_finite() && p.dist(self.fovea()) <= self.max_eccentricity_um
    }

    pub fn um_to_deg(&self, um: f64) -> f64 {
        um / self.um_per_degree
    }
}

/// Parameters of the default "spiral fan" bundle family.
///
/// In polar coordinates around the disc center, with angle `theta` measured
/// from the temporal direction and `u = |theta| / 180deg`, a bundle that
/// leaves the disc at `u0` sits at
///
/// `u(r) = u0 * (1 + s(r)) - s(r)`, with `s(r) = (c1_deg / 180) * ((r - r0) / 1000)^c2` for `r > r0`
///
/// and `s = 0` inside `r0`. Bundles bend toward the meridian with distance,
/// reach it at a finite angle (the raphe seam) and stop there. The meridian
/// itself (`u0 = 0`) and the nasal line (`u0 = 1`) are straight. The family is
/// mirror-symmetric about the meridian and, for fixed `r`, monotone in `u0`,
/// so bundles never cross each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralFan {
    pub r0_um: f64,
    pub c1_deg: f64,
    pub c2: f64,
    pub step_um: f64,
}

impl Default for SpiralFan {
    fn default() -> Self {
        Self { r0_um: 1000.0, c1_deg: 5.0, c2: 1.3, step_um: 100.0 }
    }
}

/// Serializable bundle model selection, e.g.
/// `{"model": "spiral_fan", "r0_um": 1000, "c1_deg": 5, "c2": 1.3, "step_um": 100}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BundleModelConfig {
    SpiralFan(SpiralFan),
}

impl Default for BundleModelConfig {
    fn default() -> Self {
        BundleModelConfig::SpiralFan(SpiralFan::default())
    }
}

/// A model of axon trajectories from a ganglion-cell soma to the optic disc.
pub trait BundleModel {
    fn step_um(&self) -> f64;
    fn trace(&self, soma: Point, frame: &RetinalCoordinateFrame) -> Result<AxonBundle, RetinaError>;
}

impl BundleModelConfig {
    pub fn validate(&self) -> Result<(), RetinaError> {
        match self {
            BundleModelConfig::SpiralFan(m) => m.validate(),
        }
    }
}

impl BundleModel for BundleModelConfig {
    fn step_um(&self) -> f64 {
        match self {
            BundleModelConfig::SpiralFan(m) => m.step_um,
        }
    }

    fn trace(&self, soma: Point, frame: &RetinalCoordinateFrame) -> Result<AxonBundle, RetinaError> {
        match self {
            BundleModelConfig::SpiralFan(m) => m.trace(soma, frame),
        }
    }
}

impl SpiralFan {
    pub fn validate(&self) -> Result<(), RetinaError> {
        let ok = self.r0_um >= 0.0
            && self.c1_deg >= 0.0
            && self.c1_deg.is_finite()
            && self.c2 > 1.0
            && self.c2.is_finite()
            && self.step_um > 0.0
            && self.step_um.is_finite();
        if ok {
            Ok(())
        } else {
            // c2 > 1 keeps the bend rate continuous where the bend starts.
            Err(RetinaError::InvalidModel(format!("{self:?}")))
        }
    }

    fn shift(&self, r: f64) -> f64 {
        if r <= self.r0_um {
            0.0
        } else {
            self.c1_deg / 180.0 * ((r - self.r0_um) / 1000.0).powf(self.c2)
        }
    }

    fn shift_deriv(&self, r: f64) -> f64 {
        if r <= self.r0_um {
            0.0
        } else {
            self.c1_deg / 180.0 * self.c2 * ((r - self.r0_um) / 1000.0).powf(self.c2 - 1.0) / 1000.0
        }
    }
}

/// One curve of the spiral-fan family, parameterized by disc distance.
struct FanCurve<'a> {
    model: &'a SpiralFan,
    disc: Point,
    sign: f64,
    /// Launch angle at the disc, as a fraction of 180 degrees.
    u0: f64,
    straight: bool,
}

impl FanCurve<'_> {
    fn u(&self, r: f64) -> f64 {
        if self.straight {
            self.u0
        } else {
            let s = self.model.shift(r);
            self.u0 * (1.0 + s) - s
        }
    }

    fn at(&self, r: f64) -> Point {
        let a = PI * self.u(r);
        Point::new(self.disc.x - r * a.cos(), self.disc.y + self.sign * r * a.sin())
    }

    /// |d(arc length)/dr| along the curve.
    fn speed(&self, r: f64) -> f64 {
        if self.straight {
            return 1.0;
        }
        let dtheta = PI * (self.u0 - 1.0) * self.model.shift_deriv(r);
        (1.0 + (r * dtheta).powi(2)).sqrt()
    }
}

impl BundleModel for SpiralFan {
    fn step_um(&self) -> f64 {
        self.step_um
    }

    fn trace(&self, soma: Point, frame: &RetinalCoordinateFrame) -> Result<AxonBundle, RetinaError> {
        self.validate()?;
        if !frame.in_extent(soma) {
            return Err(RetinaError::OutOfExtent { x: soma.x, y: soma.y });
        }
        if frame.inside_disc(soma) {
            return Err(RetinaError::SomaInsideDisc { x: soma.x, y: soma.y });
        }
        let disc = frame.optic_disc_center;
        let dx = soma.x - disc.x;
        let dy = soma.y - disc.y;
        let r_soma = dx.hypot(dy);
        // Work on |dy| and reapply the sign so mirrored somata give exactly mirrored paths.
        let sign = if dy > 0.0 {
            1.0
        } else if dy < 0.0 {
            -1.0
        } else {
            0.0
        };
        let u_soma = dy.abs().atan2(-dx) / PI;
        let straight = sign == 0.0;
        let u0 = if straight {
            u_soma
        } else {
            let s = self.shift(r_soma);
            (u_soma + s) / (1.0 + s)
        };
        let curve = FanCurve { model: self, disc, sign, u0, straight };

        let r_end = frame.disc_radius_um;
        let step = self.step_um;
        let mut segments = vec![soma];
        let mut cumulative = vec![0.0];
        let mut r = r_soma;
        let mut prev = soma;
        while r > r_end {
            let mut dr = (0.98 * step / curve.speed(r)).min(r - r_end);
            let (next_r, next) = loop {
                let cand_r = if dr >= r - r_end { r_end } else { r - dr };
                let cand = curve.at(cand_r);
                if cand.dist(prev) <= step || dr < 1e-6 {
                    break (cand_r, cand);
                }
                dr *= 0.8;
            };
            let len = cumulative.last().copied().unwrap_or(0.0) + next.dist(prev);
            segments.push(next);
            cumulative.push(len);
            prev = next;
            r = next_r;
        }
        Ok(AxonBundle { soma, segments, cumulative_path_length: cumulative })
    }
}

/// Polyline of an axon from its soma (index 0) to the optic disc boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxonBundle {
    pub soma: Point,
    pub segments: Vec<Point>,
    pub cumulative_path_length: Vec<f64>,
}

impl AxonBundle {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Unit direction of the first segment (from the soma toward the disc).
    pub fn initial_direction(&self) -> Option<(f64, f64)> {
        let a = *self.segments.first()?;
        let b = *self.segments.get(1)?;
        let d = a.dist(b);
        (d > 0.0).then(|| ((b.x - a.x) / d, (b.y - a.y) / d))
    }
}

/// Traces the axon that leaves `soma` under the configured bundle model.
pub fn trace_bundle(
    soma: Point,
    frame: &RetinalCoordinateFrame,
    model: &BundleModelConfig,
) -> Result<AxonBundle, RetinaError> {
    model.trace(soma, frame)
}

/// Axon path length from the soma to `segment_index`.
pub fn path_length_to(bundle: &AxonBundle, segment_index: usize) -> Result<f64, RetinaError> {
    bundle
        .cumulative_path_length
        .get(segment_index)
        .copied()
        .ok_or(RetinaError::IndexOutOfRange { index: segment_index, len: bundle.len() })
}

/// Axis-aligned rectangle in retinal micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn square(half_width: f64) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x_min, self.y_max),
            Point::new(self.x_max, self.y_max),
            Point::new(self.x_min, self.y_min),
            Point::new(self.x_max, self.y_min),
        ]
    }
}

/// Regular lattice of ganglion-cell somata, one per percept pixel.
///
/// Pixel `(row, col)` maps to `x` increasing with `col` and `y` decreasing with
/// `row`, so row 0 is the superior edge and image orientation is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerceptGridSpec", into = "PerceptGridSpec")]
pub struct PerceptGrid {
    pub width: usize,
    pub height: usize,
    pub extent: Extent,
    soma_positions: Vec<Point>,
}

/// Serialized form of a [`PerceptGrid`]; the lattice is recomputed on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptGridSpec {
    pub width: usize,
    pub height: usize,
    pub extent: Extent,
}

impl TryFrom<PerceptGridSpec> for PerceptGrid {
    type Error = RetinaError;

    fn try_from(s: PerceptGridSpec) -> Result<Self, Self::Error> {
        PerceptGrid::rebuild(s.width, s.height, s.extent)
    }
}

impl From<PerceptGrid> for PerceptGridSpec {
    fn from(g: PerceptGrid) -> Self {
        PerceptGridSpec { width: g.width, height: g.height, extent: g.extent }
    }
}

impl PerceptGrid {
    pub fn soma_positions(&self) -> &[Point] {
        &self.soma_positions
    }

    pub fn soma(&self, row: usize, col: usize) -> Point {
        self.soma_positions[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            self.extent.width() / (self.width - 1) as f64,
            self.extent.height() / (self.height - 1) as f64,
        )
    }

    pub fn spec(&self) -> PerceptGridSpec {
        PerceptGridSpec { width: self.width, height: self.height, extent: self.extent }
    }

    /// Lays out the soma lattice without checking it against a retinal frame.
    pub fn rebuild(width: usize, height: usize, extent: Extent) -> Result<Self, RetinaError> {
        if width < 2 || height < 2 {
            return Err(RetinaError::BadExtent(format!("grid {width}x{height} needs >= 2 pixels per side")));
        }
        let lerp = |a: f64, b: f64, i: usize, n: usize| {
            let t = i as f64 / (n - 1) as f64;
            a * (1.0 - t) + b * t
        };
        let mut soma_positions = Vec::with_capacity(width * height);
        for row in 0..height {
            let y = lerp(extent.y_max, extent.y_min, row, height);
            for col in 0..width {
                soma_positions.push(Point::new(lerp(extent.x_min, extent.x_max, col, width), y));
            }
        }
        Ok(Self { width, height, extent, soma_positions })
    }
}

/// Default percept plane: 256 x 256 pixels over +-4500 um.
pub const DEFAULT_PERCEPT_SIZE: usize = 256;
pub const DEFAULT_PERCEPT_HALF_WIDTH_UM: f64 = 4500.0;

pub fn build_percept_grid(
    frame: &RetinalCoordinateFrame,
    width: usize,
    height: usize,
    extent: Extent,
) -> Result<PerceptGrid, RetinaError> {
    let finite = [extent.x_min, extent.x_max, extent.y_min, extent.y_max].iter().all(|v| v.is_finite());
    if !finite || extent.x_min >= extent.x_max || extent.y_min >= extent.y_max {
        return Err(RetinaError::BadExtent(format!("{extent:?}")));
    }
    if let Some(c) = extent.corners().into_iter().find(|c| !frame.in_extent(*c)) {
        return Err(RetinaError::BadExtent(format!(
            "corner ({:.0}, {:.0}) lies outside the modeled retina",
            c.x, c.y
        )));
    }
    PerceptGrid::rebuild(width, height, extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame() -> RetinalCoordinateFrame {
        RetinalCoordinateFrame::default()
    }

    fn model() -> BundleModelConfig {
        BundleModelConfig::default()
    }

    fn check_invariants(b: &AxonBundle, f: &RetinalCoordinateFrame, step: f64) {
        assert_eq!(b.segments[0], b.soma);
        assert_eq!(b.cumulative_path_length[0], 0.0);
        for w in b.cumulative_path_length.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in b.segments.windows(2) {
            assert!(w[0].dist(w[1]) <= step + 1e-9);
        }
        let last = *b.segments.last().unwrap();
        let gap = (last.dist(f.optic_disc_center) - f.disc_radius_um).abs();
        assert!(gap <= step, "final segment {gap} um from disc edge");
        if b.soma.y != 0.0 {
            for s in &b.segments {
                if s.x < 0.0 {
                    assert_eq!(s.y.signum(), b.soma.y.signum(), "raphe crossed at {s:?}");
                }
            }
        }
    }

    #[test]
    fn nasal_meridian_is_straight() {
        let f = frame();
        let b = trace_bundle(Point::new(1500.0, 0.0), &f, &model()).unwrap();
        check_invariants(&b, &f, 100.0);
        assert!(b.segments.iter().all(|s| s.y == 0.0));
        let last = b.segments.last().unwrap();
        assert!((last.x - (4200.0 - 900.0)).abs() < 1e-9);
    }

    #[test]
    fn superior_temporal_soma_arcs_over_fovea() {
        let f = frame();
        let b = trace_bundle(Point::new(-2800.0, 1400.0), &f, &model()).unwrap();
        check_invariants(&b, &f, 100.0);
        assert!(b.segments[..b.len() - 1].iter().all(|s| s.y > 0.0));
        // where the path passes the fovea's x, it is well above it
        let over = b.segments.iter().min_by(|a, c| a.x.abs().total_cmp(&c.x.abs())).unwrap();
        assert!(over.x.abs() < 100.0 && over.y > 1400.0, "{over:?}");
    }

    #[test]
    fn inferior_soma_is_mirror_image() {
        let f = frame();
        let up = trace_bundle(Point::new(-2800.0, 1400.0), &f, &model()).unwrap();
        let down = trace_bundle(Point::new(-2800.0, -1400.0), &f, &model()).unwrap();
        assert_eq!(up.len(), down.len());
        for (a, b) in up.segments.iter().zip(&down.segments) {
            assert!((a.x - b.x).abs() <= 1e-9 && (a.y + b.y).abs() <= 1e-9);
        }
    }

    #[test]
    fn trace_errors() {
        let f = frame();
        assert!(matches!(
            trace_bundle(Point::new(4300.0, 100.0), &f, &model()),
            Err(RetinaError::SomaInsideDisc { .. })
        ));
        assert!(matches!(
            trace_bundle(Point::new(-20_000.0, 0.0), &f, &model()),
            Err(RetinaError::OutOfExtent { .. })
        ));
    }

    #[test]
    fn path_length_examples() {
        let b = AxonBundle {
            soma: Point::new(0.0, 0.0),
            segments: vec![Point::new(0.0, 0.0), Point::new(50.0, 0.0), Point::new(100.0, 0.0)],
            cumulative_path_length: vec![0.0, 50.0, 100.0],
        };
        assert_eq!(path_length_to(&b, 0).unwrap(), 0.0);
        assert_eq!(path_length_to(&b, 2).unwrap(), 100.0);
        assert_eq!(path_length_to(&b, 3), Err(RetinaError::IndexOutOfRange { index: 3, len: 3 }));
    }

    #[test]
    fn percept_grid_lattice() {
        let f = frame();
        let g = PerceptGrid::rebuild(2, 2, Extent::square(100.0)).unwrap();
        let corners: Vec<_> = g.soma_positions().to_vec();
        assert_eq!(
            corners,
            vec![
                Point::new(-100.0, 100.0),
                Point::new(100.0, 100.0),
                Point::new(-100.0, -100.0),
                Point::new(100.0, -100.0)
            ]
        );
        let g = PerceptGrid::rebuild(3, 3, Extent::square(100.0)).unwrap();
        let xs: Vec<f64> = (0..3).map(|c| g.soma(0, c).x).collect();
        assert_eq!(xs, vec![-100.0, 0.0, 100.0]);

        let g = build_percept_grid(&f, 256, 256, Extent::square(4500.0)).unwrap();
        let expected: f64 = 9000.0 / 255.0;
        assert!((expected - 35.294).abs() < 1e-3);
        for c in 1..256 {
            let d = g.soma(0, c).x - g.soma(0, c - 1).x;
            assert!((d - expected).abs() < 1e-9);
            let d = g.soma(c - 1, 0).y - g.soma(c, 0).y;
            assert!((d - expected).abs() < 1e-9);
        }
        assert_eq!(g.soma(255, 255), Point::new(4500.0, -4500.0));
    }

    #[test]
    fn percept_grid_errors() {
        let f = frame();
        let bad = Extent { x_min: 10.0, x_max: -10.0, y_min: 0.0, y_max: 1.0 };
        assert!(matches!(build_percept_grid(&f, 8, 8, bad), Err(RetinaError::BadExtent(_))));
        assert!(matches!(
            build_percept_grid(&f, 8, 8, Extent::square(20_000.0)),
            Err(RetinaError::BadExtent(_))
        ));
        assert!(build_percept_grid(&f, 1, 8, Extent::square(100.0)).is_err());
    }

    #[test]
    fn config_json_shape() {
        let json = serde_json::to_value(model()).unwrap();
        assert_eq!(json["model"], "spiral_fan");
        for key in ["r0_um", "c1_deg", "c2", "step_um"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: BundleModelConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, model());
    }

    fn soma_strategy() -> impl Strategy<Value = Point> {
        (-9000.0f64..9000.0, -9000.0f64..9000.0)
            .prop_map(|(x, y)| Point::new(x, y))
            .prop_filter("outside disc", |p| p.dist(Point::new(4200.0, 0.0)) > 950.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn raphe_never_crossed(soma in soma_strategy().prop_filter("off meridian", |p| p.y.abs() > 50.0)) {
            let f = frame();
            let b = trace_bundle(soma, &f, &model()).unwrap();
            for s in b.segments.iter().filter(|s| s.x < 0.0) {
                prop_assert_eq!(s.y.signum(), soma.y.signum());
            }
        }
    }

    proptest! {
        #[test]
        fn traced_bundles_hold_invariants(soma in soma_strategy()) {
            let f = frame();
            let b = trace_bundle(soma, &f, &model()).unwrap();
            check_invariants(&b, &f, 100.0);
            // arc length is the plain sum of chord lengths
            let mut acc = 0.0;
            for i in 1..b.len() {
                acc += b.segments[i].dist(b.segments[i - 1]);
                prop_assert!((path_length_to(&b, i).unwrap() - acc).abs() <= 1e-9);
            }
        }

        #[test]
        fn bundles_are_smooth(soma in soma_strategy()) {
            let b = trace_bundle(soma, &frame(), &model()).unwrap();
            for w in b.segments.windows(3) {
                let (ax, ay) = (w[1].x - w[0].x, w[1].y - w[0].y);
                let (bx, by) = (w[2].x - w[1].x, w[2].y - w[1].y);
                let cos = (ax * bx + ay * by) / (ax.hypot(ay) * bx.hypot(by));
                let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
                // the last chord may be short, which does not change the direction much
                prop_assert!(angle < 15.0, "turn of {angle} deg at {:?}", w[1]);
            }
        }

        #[test]
        fn tracing_is_deterministic_and_mirror_symmetric(soma in soma_strategy()) {
            let f = frame();
            let a = trace_bundle(soma, &f, &model()).unwrap();
            let b = trace_bundle(soma, &f, &model()).unwrap();
            prop_assert_eq!(&a, &b);
            let m = trace_bundle(soma.mirrored(), &f, &model()).unwrap();
            prop_assert_eq!(a.len(), m.len());
            for (p, q) in a.segments.iter().zip(&m.segments) {
                prop_assert!((p.x - q.x).abs() <= 1e-9 && (p.y + q.y).abs() <= 1e-9);
            }
        }

        #[test]
        fn nasal_meridian_somata_stay_on_meridian(x in 0.0f64..3250.0) {
            let b = trace_bundle(Point::new(x, 0.0), &frame(), &model()).unwrap();
            prop_assert!(b.segments.iter().all(|s| s.y.abs() <= 1e-9));
        }
    }
}
