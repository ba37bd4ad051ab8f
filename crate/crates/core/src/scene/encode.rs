use super::GrayFrame;
use crate::render::{AmplitudeFrame, ElectrodeGrid};
use ndarray::Array2;

/// Area-overlap weights mapping `n_src` unit cells onto `n_dst` equal bins.
/// Each bin's weights sum to 1.
fn area_weights(n_src: usize, n_dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_src as f64 / n_dst as f64;
    (0..n_dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_src);
            (first..last)
                .filter_map(|k| {
                    let overlap = hi.min((k + 1) as f64) - lo.max(k as f64);
                    (overlap > 0.0).then_some((k, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Box-filters a gray frame down (or up) to the electrode grid and divides by
/// 255. Fractional pixel overlaps are weighted exactly. Row 0 of the image is
/// electrode row 0.
pub fn encode_amplitudes(gray: &GrayFrame, grid: &ElectrodeGrid) -> AmplitudeFrame {
    let img = gray.pixels();
    let (h, w) = img.dim();
    let wr = area_weights(h, grid.rows);
    let wc = area_weights(w, grid.cols);
    // columns first, then rows
    let mut cols = Array2::<f64>::zeros((h, grid.cols));
    for r in 0..h {
        for (j, ws) in wc.iter().enumerate() {
            cols[[r, j]] = ws.iter().map(|&(c, wt)| wt * img[[r, c]]).sum();
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for ws in &wr {
        for j in 0..grid.cols {
            let v: f64 = ws.iter().map(|&(r, wt)| wt * cols[[r, j]]).sum();
            values.push((v / 255.0).clamp(0.0, 1.0));
        }
    }
    AmplitudeFrame { rows: grid.rows, cols: grid.cols, values, frame_index: gray.frame_index, timestamp_ms: 0.0 }
}
