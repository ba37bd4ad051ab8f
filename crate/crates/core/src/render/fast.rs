//! Table-driven renderer.
//!
//! Per frame the electrode drive is either sampled once on a fine lattice
//! (separable in x and y for Gaussian decay) and interpolated at every table
//! entry, or evaluated exactly per entry. Each pixel scans its entries in
//! descending weight order and stops as soon as `weight * max_drive` cannot
//! beat the running maximum.

use super::table::{FieldSampling, SensitivityTable};
use super::{AmplitudeFrame, AxonMapParams, DecayForm, ElectrodeGrid, PerceptFrame, RenderError};
use crate::exec::Exec;
use crate::retina::PerceptGrid;

/// Kernel values below this are treated as zero when sampling the lattice.
const KERNEL_FLOOR: f64 = 1e-18;
const MAX_LATTICE_POINTS: usize = 64 << 20;
/// Drive dropped outside the lattice is bounded by this.
const DRIVE_FLOOR: f64 = 1e-9;
/// Side of the pixel tiles rendered together.
const TILE: usize = 16;
/// Lattice cells per side of a block-maximum bound.
const BLOCK: usize = 16;

/// Drive sampled at the global lattice points `(i h, j h)`. Anchoring the
/// points to the origin keeps every sample position, and so every
/// interpolation weight, independent of the frame.
struct Lattice {
    /// Global index of the first point along x and y.
    i0: i64,
    j0: i64,
    inv_h: f64,
    nx: usize,
    /// Region with non-negligible drive; zero outside.
    region: [f64; 4],
    /// Single precision halves the memory traffic; rounding stays monotone.
    values: Vec<f32>,
    /// Max over the points of each `BLOCK x BLOCK` block of cells, boundary included.
    block_max: Vec<f32>,
    nbx: usize,
}

impl Lattice {
    /// Bilinear interpolation. Its weights are non-negative, so the sample
    /// can only grow when any electrode amplitude grows. Returns 0 without
    /// reading the lattice when the enclosing block cannot exceed `floor`.
    #[inline]
    fn sample_above(&self, x: f64, y: f64, floor: f64) -> f64 {
        let [x_lo, x_hi, y_lo, y_hi] = self.region;
        if x < x_lo || x > x_hi || y < y_lo || y > y_hi {
            return 0.0;
        }
        let (fx, fy) = (x * self.inv_h, y * self.inv_h);
        let (gx, gy) = (floor_i64(fx), floor_i64(fy));
        let (li, lj) = ((gx - self.i0) as usize, (gy - self.j0) as usize);
        if self.block_max[(lj / BLOCK) * self.nbx + li / BLOCK] as f64 <= floor {
            return 0.0;
        }
        let (tx, ty) = (fx - gx as f64, fy - gy as f64);
        let i = lj * self.nx + li;
        let v = |k: usize| self.values[k] as f64;
        let top = v(i) + tx * (v(i + 1) - v(i));
        let bottom = v(i + self.nx) + tx * (v(i + self.nx + 1) - v(i + self.nx));
        top + ty * (bottom - top)
    }

    fn max(&self) -> f64 {
        self.block_max.iter().copied().fold(0.0f32, f32::max) as f64
    }
}

/// Block maxima of a `nx x ny` lattice; see [`Lattice::block_max`].
fn block_maxima(values: &[f32], nx: usize, ny: usize) -> (Vec<f32>, usize) {
    let nbx = (nx - 1).div_ceil(BLOCK);
    let nby = (ny - 1).div_ceil(BLOCK);
    let span = |b: usize, n: usize| b * BLOCK..=((b + 1) * BLOCK).min(n - 1);
    let mut row_max = vec![0.0f32; ny * nbx];
    for (j, row) in values.chunks_exact(nx).enumerate() {
        for bx in 0..nbx {
            row_max[j * nbx + bx] = row[span(bx, nx)].iter().copied().fold(0.0, f32::max);
        }
    }
    let mut out = vec![0.0f32; nby * nbx];
    for by in 0..nby {
        for j in span(by, ny) {
            for bx in 0..nbx {
                let m = &mut out[by * nbx + bx];
                *m = m.max(row_max[j * nbx + bx]);
            }
        }
    }
    (out, nbx)
}

/// `floor` without a libm call on targets lacking a rounding instruction.
#[inline]
fn floor_i64(v: f64) -> i64 {
    let t = v as i64;
    t - ((t as f64) > v) as i64
}

fn gaussian_profile(coords: &[f64], centers: &[f64], rho: f64) -> Vec<Vec<f64>> {
    let k = 1.0 / (2.0 * rho * rho);
    centers
        .iter()
        .map(|&c| coords.iter().map(|&x| (-(x - c) * (x - c) * k).exp()).collect())
        .collect()
}

fn sample_lattice(
    exec: Exec,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    rho: f64,
    region: [f64; 4],
    h: f64,
) -> Result<Lattice, RenderError> {
    // one point of padding beyond the region on each side
    let i0 = (region[0] / h).floor() as i64 - 1;
    let j0 = (region[2] / h).floor() as i64 - 1;
    let nx = ((region[1] / h).ceil() as i64 + 2 - i0) as usize;
    let ny = ((region[3] / h).ceil() as i64 + 2 - j0) as usize;
    if nx.saturating_mul(ny) > MAX_LATTICE_POINTS {
        return Err(RenderError::InvalidParams(format!(
            "drive lattice of {nx}x{ny} points is too large; lower the oversampling"
        )));
    }
    let xs: Vec<f64> = (0..nx).map(|i| (i0 + i as i64) as f64 * h).collect();
    let ys: Vec<f64> = (0..ny).map(|j| (j0 + j as i64) as f64 * h).collect();
    let gx = gaussian_profile(&xs, &grid.column_xs(), rho);
    let gy = gaussian_profile(&ys, &grid.row_ys(), rho);

    // Collapse the columns first: per electrode row, the drive along x.
    let mut row_drive = vec![vec![0.0f32; nx]; grid.rows];
    for (r, drive) in row_drive.iter_mut().enumerate() {
        let mut acc = vec![0.0f64; nx];
        for c in 0..grid.cols {
            let a = amps.values[r * grid.cols + c];
            if a == 0.0 {
                continue;
            }
            for (d, g) in acc.iter_mut().zip(&gx[c]) {
                *d += a * g;
            }
        }
        for (d, v) in drive.iter_mut().zip(acc) {
            *d = v as f32;
        }
    }

    let mut values = vec![0.0f32; nx * ny];
    exec.fill_chunks(&mut values, nx, |j, out| {
        for (r, drive) in row_drive.iter().enumerate() {
            let g = gy[r][j];
            if g < KERNEL_FLOOR {
                continue;
            }
            let g = g as f32;
            for (o, d) in out.iter_mut().zip(drive) {
                *o += g * d;
            }
        }
    });
    let (block_max, nbx) = block_maxima(&values, nx, ny);
    Ok(Lattice { i0, j0, inv_h: 1.0 / h, nx, region, values, block_max, nbx })
}

/// Interpolation error grows with the field's curvature, about `1/rho^2`
/// per kernel times the number of kernels overlapping a point, which scales
/// as `(rho/pitch)^2` once kernels overlap. Sampling at `min(rho, pitch)/os`
/// therefore keeps the error roughly constant across conditions.
fn lattice_spacing(grid: &ElectrodeGrid, rho: f64, oversampling: f64) -> f64 {
    let scale = if grid.len() > 1 { rho.min(grid.pitch_um) } else { rho };
    scale / oversampling
}

/// Part of the table bounds where the Gaussian drive can exceed [`DRIVE_FLOOR`].
///
/// At distance `d` from the array's bounding box every kernel is at most
/// `exp(-d^2 / 2 rho^2)`, so the drive is at most `sum(a) exp(-d^2 / 2 rho^2)`.
fn drive_region(amps: &AmplitudeFrame, grid: &ElectrodeGrid, rho: f64, table_bounds: [f64; 4]) -> Option<[f64; 4]> {
    let total: f64 = amps.values.iter().sum();
    let margin = rho * (2.0 * (total / DRIVE_FLOOR).ln()).max(0.0).sqrt();
    let (xs, ys) = (grid.column_xs(), grid.row_ys());
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = [
        table_bounds[0].max(min(&xs) - margin),
        table_bounds[1].min(max(&xs) + margin),
        table_bounds[2].max(min(&ys) - margin),
        table_bounds[3].min(max(&ys) + margin),
    ];
    (r[0] <= r[1] && r[2] <= r[3]).then_some(r)
}

/// Exact electrode drive at `(x, y)`, reusing scratch buffers.
struct ExactDrive<'a> {
    amps: &'a AmplitudeFrame,
    grid: &'a ElectrodeGrid,
    params: &'a AxonMapParams,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl<'a> ExactDrive<'a> {
    fn new(amps: &'a AmplitudeFrame, grid: &'a ElectrodeGrid, params: &'a AxonMapParams) -> Self {
        Self { amps, grid, params, xs: grid.column_xs(), ys: grid.row_ys() }
    }

    #[inline]
    fn at(&self, x: f64, y: f64, gx: &mut [f64]) -> f64 {
        match self.params.decay {
            DecayForm::Gaussian => {
                let k = 1.0 / (2.0 * self.params.rho_um * self.params.rho_um);
                for (g, &ex) in gx.iter_mut().zip(&self.xs) {
                    *g = (-(x - ex) * (x - ex) * k).exp();
                }
                let cols = self.grid.cols;
                self.ys
                    .iter()
                    .enumerate()
                    .map(|(r, &ey)| {
                        let row = &self.amps.values[r * cols..(r + 1) * cols];
                        let inner: f64 = row.iter().zip(gx.iter()).map(|(a, g)| a * g).sum();
                        (-(y - ey) * (y - ey) * k).exp() * inner
                    })
                    .sum()
            }
            DecayForm::Exponential => self
                .grid
                .positions()
                .iter()
                .zip(&self.amps.values)
                .map(|(e, a)| a * self.params.spatial((x - e.x) * (x - e.x) + (y - e.y) * (y - e.y)))
                .sum(),
        }
    }
}

/// Pre-clip activations for every pixel of the table's percept grid.
pub fn fast_response(
    exec: Exec,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    table: &SensitivityTable,
) -> Result<Vec<f64>, RenderError> {
    amps.check_shape(grid)?;
    if table.params() != params {
        return Err(RenderError::TableMismatch(format!(
            "table has {:?}, render requested {:?}",
            table.params(),
            params
        )));
    }
    let pixels = table.pixel_count();
    let mut out = vec![0.0; pixels];
    let Some(bounds) = table.bounds() else {
        return Ok(out);
    };
    if amps.values.iter().all(|&a| a == 0.0) {
        return Ok(out);
    }

    match table.key().options.field {
        FieldSampling::Lattice { oversampling } if params.decay == DecayForm::Gaussian => {
            let Some(region) = drive_region(amps, grid, params.rho_um, bounds) else {
                return Ok(out);
            };
            let lattice = sample_lattice(exec, amps, grid, params.rho_um, region, lattice_spacing(grid, params.rho_um, oversampling))?;
            let max_drive = lattice.max();
            let pixel = |p: usize| {
                let mut best = 0.0f64;
                for k in table.pixel_range(p) {
                    let w = table.weight[k];
                    if w * max_drive <= best {
                        break;
                    }
                    best = best.max(w * lattice.sample_above(table.seg_x[k], table.seg_y[k], best / w));
                }
                best
            };
            // Neighboring somata have nearly parallel axons, so square tiles
            // keep their lattice reads in cache.
            let spec = table.key().percept;
            let tiles_x = spec.width.div_ceil(TILE);
            let tiles = exec.map_range(tiles_x * spec.height.div_ceil(TILE), |t| {
                let (r0, c0) = ((t / tiles_x) * TILE, (t % tiles_x) * TILE);
                let mut vals = Vec::with_capacity(TILE * TILE);
                for r in r0..(r0 + TILE).min(spec.height) {
                    for c in c0..(c0 + TILE).min(spec.width) {
                        vals.push(pixel(r * spec.width + c));
                    }
                }
                vals
            });
            for (t, vals) in tiles.into_iter().enumerate() {
                let (r0, c0) = ((t / tiles_x) * TILE, (t % tiles_x) * TILE);
                let cols = (c0 + TILE).min(spec.width) - c0;
                for (i, v) in vals.into_iter().enumerate() {
                    out[(r0 + i / cols) * spec.width + c0 + i % cols] = v;
                }
            }
        }
        _ => {
            // every kernel is <= 1, so the drive never exceeds the amplitude sum
            let max_drive: f64 = amps.values.iter().sum();
            let drive = ExactDrive::new(amps, grid, params);
            exec.fill_chunks(&mut out, 64, |chunk, slots| {
                let mut gx = vec![0.0; grid.cols];
                for (i, slot) in slots.iter_mut().enumerate() {
                    let p = chunk * 64 + i;
                    let mut best = 0.0f64;
                    for k in table.pixel_range(p) {
                        let w = table.weight[k];
                        if w * max_drive <= best {
                            break;
                        }
                        best = best.max(w * drive.at(table.seg_x[k], table.seg_y[k], &mut gx));
                    }
                    *slot = best;
                }
            });
        }
    }
    Ok(out)
}

pub fn render_fast(
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    table: &SensitivityTable,
) -> Result<PerceptFrame, RenderError> {
    render_fast_with(Exec::default(), amps, grid, params, table)
}

pub fn render_fast_with(
    exec: Exec,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    table: &SensitivityTable,
) -> Result<PerceptFrame, RenderError> {
    let raw = fast_response(exec, amps, grid, params, table)?;
    let spec = table.key().percept;
    let percept = PerceptGrid::rebuild(spec.width, spec.height, spec.extent)?;
    Ok(PerceptFrame::from_response(&percept, &raw, amps.frame_index))
}

/// Renders a clip. The model is memoryless, so frames are independent and may
/// be rendered in any order.
pub fn render_video(
    frames: &[AmplitudeFrame],
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    table: &SensitivityTable,
) -> Result<Vec<PerceptFrame>, RenderError> {
    render_video_with(Exec::default(), frames, grid, params, table)
}

pub fn render_video_with(
    exec: Exec,
    frames: &[AmplitudeFrame],
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    table: &SensitivityTable,
) -> Result<Vec<PerceptFrame>, RenderError> {
    for f in frames {
        f.check_shape(grid)?;
    }
    exec.map_slice(frames, |f| render_fast_with(Exec::Sequential, f, grid, params, table))
        .into_iter()
        .collect()
}
