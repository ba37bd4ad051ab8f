//! Per-pixel axonal sensitivity, precomputed once per (percept, params, retina).

use super::{check_w_min, AxonMapParams, RenderError, Retina};
use crate::exec::Exec;
use crate::retina::{trace_bundle, PerceptGrid, PerceptGridSpec};
use serde::{Deserialize, Serialize};

/// How the fast renderer evaluates the electrode drive at axon segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FieldSampling {
    /// Sample the drive on a regular lattice of spacing `rho / oversampling`
    /// once per frame, then interpolate bilinearly. Needs the separable
    /// Gaussian kernel; exponential decay always renders as [`Exact`](Self::Exact).
    Lattice { oversampling: f64 },
    /// Evaluate the drive at every segment (same arithmetic as the oracle).
    Exact,
}

impl Default for FieldSampling {
    fn default() -> Self {
        FieldSampling::Lattice { oversampling: 24.0 }
    }
}

pub const DEFAULT_W_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub w_min: f64,
    pub field: FieldSampling,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { w_min: DEFAULT_W_MIN, field: FieldSampling::default() }
    }
}

/// Everything a table depends on; renders check it against their own inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableKey {
    pub percept: PerceptGridSpec,
    pub params: AxonMapParams,
    pub retina: Retina,
    pub options: TableOptions,
}

/// Axon segments per percept pixel with their axonal weights, stored as CSR.
///
/// Entries of one pixel are ordered by descending weight (ascending path
/// length), start with the soma itself at weight 1 and stop before the first
/// weight below `w_min`. Pixels inside the optic disc have no entries.
#[derive(Debug, Clone)]
pub struct SensitivityTable {
    key: TableKey,
    offsets: Vec<usize>,
    pub(crate) seg_x: Vec<f64>,
    pub(crate) seg_y: Vec<f64>,
    pub(crate) weight: Vec<f64>,
    bounds: Option<[f64; 4]>,
}

impl SensitivityTable {
    pub fn key(&self) -> &TableKey {
        &self.key
    }

    pub fn params(&self) -> &AxonMapParams {
        &self.key.params
    }

    pub fn pixel_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn entry_count(&self) -> usize {
        self.weight.len()
    }

    pub fn pixel_range(&self, pixel: usize) -> std::ops::Range<usize> {
        self.offsets[pixel]..self.offsets[pixel + 1]
    }

    /// `(x, y, weight)` entries of one pixel.
    pub fn entries(&self, pixel: usize) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.pixel_range(pixel).map(|k| (self.seg_x[k], self.seg_y[k], self.weight[k]))
    }

    /// `[x_min, x_max, y_min, y_max]` over all segments, `None` for an empty table.
    pub fn bounds(&self) -> Option<[f64; 4]> {
        self.bounds
    }
}

pub fn build_sensitivity_table(
    percept: &PerceptGrid,
    params: &AxonMapParams,
    retina: &Retina,
    w_min: f64,
) -> Result<SensitivityTable, RenderError> {
    build_sensitivity_table_with(Exec::default(), percept, params, retina, TableOptions { w_min, ..Default::default() })
}

pub fn build_sensitivity_table_with(
    exec: Exec,
    percept: &PerceptGrid,
    params: &AxonMapParams,
    retina: &Retina,
    options: TableOptions,
) -> Result<SensitivityTable, RenderError> {
    params.validate()?;
    retina.validate()?;
    check_w_min(options.w_min)?;
    if let FieldSampling::Lattice { oversampling } = options.field {
        if !(oversampling >= 1.0 && oversampling.is_finite()) {
            return Err(RenderError::InvalidParams(format!("lattice oversampling must be >= 1, got {oversampling}")));
        }
    }

    let per_pixel = exec.map_slice(percept.soma_positions(), |&soma| -> Result<Vec<(f64, f64, f64)>, RenderError> {
        if retina.frame.inside_disc(soma) {
            return Ok(Vec::new());
        }
        let bundle = trace_bundle(soma, &retina.frame, &retina.bundles)?;
        let mut out = Vec::new();
        for (seg, &len) in bundle.segments.iter().zip(&bundle.cumulative_path_length) {
            let w = params.axonal(len);
            // path length only grows, so the weight only shrinks from here on
            if w < options.w_min {
                break;
            }
            out.push((seg.x, seg.y, w));
        }
        Ok(out)
    });

    let mut offsets = Vec::with_capacity(percept.len() + 1);
    offsets.push(0);
    let total: usize = per_pixel.iter().map(|r| r.as_ref().map_or(0, Vec::len)).sum();
    let mut seg_x = Vec::with_capacity(total);
    let mut seg_y = Vec::with_capacity(total);
    let mut weight = Vec::with_capacity(total);
    let mut bounds: Option<[f64; 4]> = None;
    for entries in per_pixel {
        for (x, y, w) in entries? {
            seg_x.push(x);
            seg_y.push(y);
            weight.push(w);
            let b = bounds.get_or_insert([x, x, y, y]);
            b[0] = b[0].min(x);
            b[1] = b[1].max(x);
            b[2] = b[2].min(y);
            b[3] = b[3].max(y);
        }
        offsets.push(seg_x.len());
    }

    Ok(SensitivityTable {
        key: TableKey { percept: percept.spec(), params: *params, retina: retina.clone(), options },
        offsets,
        seg_x,
        seg_y,
        weight,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retina::{Extent, Point};

    fn percept(n: usize) -> PerceptGrid {
        PerceptGrid::rebuild(n, n, Extent::square(4500.0)).unwrap()
    }

    #[test]
    fn lambda_zero_keeps_only_the_soma() {
        let pg = percept(32);
        let retina = Retina::default();
        let t = build_sensitivity_table(&pg, &AxonMapParams::new(100.0, 0.0).unwrap(), &retina, 1e-3).unwrap();
        for (i, soma) in pg.soma_positions().iter().enumerate() {
            let e: Vec<_> = t.entries(i).collect();
            if retina.frame.inside_disc(*soma) {
                assert!(e.is_empty());
            } else {
                assert_eq!(e, vec![(soma.x, soma.y, 1.0)]);
            }
        }
    }

    #[test]
    fn straight_bundle_cut_matches_inverted_weight() {
        // Somata on the nasal meridian have straight bundles; exp(-l^2 / 2 lambda^2) >= e^-2 <=> l <= 2 lambda.
        let pg = PerceptGrid::rebuild(2, 2, Extent { x_min: -4400.0, x_max: -4000.0, y_min: 0.0, y_max: 100.0 }).unwrap();
        let params = AxonMapParams::new(100.0, 1000.0).unwrap();
        let t = build_sensitivity_table(&pg, &params, &Retina::default(), (-2.0f64).exp()).unwrap();
        // pixel (1, 0) sits at (-4400, 0)
        let soma = Point::new(-4400.0, 0.0);
        let entries: Vec<_> = t.entries(2).collect();
        let last = entries.last().unwrap();
        let l_last = Point::new(last.0, last.1).dist(soma);
        assert!(l_last <= 2000.0 + 1e-9);
        assert!(l_last > 2000.0 - 100.0 - 1e-9, "table stops early at {l_last}");
        assert!(entries.iter().all(|e| e.1 == 0.0));
        for w in entries.windows(2) {
            assert!(w[0].2 >= w[1].2);
        }
        assert_eq!(entries[0], (soma.x, soma.y, 1.0));
    }

    #[test]
    fn table_grows_with_lambda() {
        let pg = percept(24);
        let retina = Retina::default();
        let small = build_sensitivity_table(&pg, &AxonMapParams::new(300.0, 1000.0).unwrap(), &retina, 1e-3).unwrap();
        let large = build_sensitivity_table(&pg, &AxonMapParams::new(300.0, 5000.0).unwrap(), &retina, 1e-3).unwrap();
        assert!(large.entry_count() > small.entry_count());
        for i in 0..pg.len() {
            assert!(large.pixel_range(i).len() >= small.pixel_range(i).len());
        }
    }

    #[test]
    fn construction_is_deterministic_across_exec() {
        let pg = percept(20);
        let p = AxonMapParams::new(300.0, 1000.0).unwrap();
        let opts = TableOptions::default();
        let a = build_sensitivity_table_with(Exec::Sequential, &pg, &p, &Retina::default(), opts).unwrap();
        let b = build_sensitivity_table_with(Exec::Parallel, &pg, &p, &Retina::default(), opts).unwrap();
        assert_eq!(a.offsets, b.offsets);
        assert_eq!(a.seg_x, b.seg_x);
        assert_eq!(a.seg_y, b.seg_y);
        assert_eq!(a.weight, b.weight);
    }

    #[test]
    fn rejects_bad_w_min() {
        let pg = percept(8);
        let p = AxonMapParams::new(300.0, 1000.0).unwrap();
        for w in [0.0, 1.0, -1.0] {
            assert!(build_sensitivity_table(&pg, &p, &Retina::default(), w).is_err());
        }
    }
}
