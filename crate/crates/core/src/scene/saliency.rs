use super::VideoFrame;
use ndarray::Array2;

const INNER_RADIUS: usize = 1;
const OUTER_RADIUS: usize = 10;

/// Summed-area table with a zero first row and column.
fn integral(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let mut s = Array2::zeros((h + 1, w + 1));
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += img[[r, c]];
            s[[r + 1, c + 1]] = s[[r, c + 1]] + row;
        }
    }
    s
}

/// Mean over the `(2 radius + 1)^2` window, clipped at the borders.
fn box_mean(s: &Array2<f64>, r: usize, c: usize, radius: usize) -> f64 {
    let (h, w) = (s.nrows() - 1, s.ncols() - 1);
    let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(h));
    let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(w));
    let sum = s[[r1, c1]] - s[[r0, c1]] - s[[r1, c0]] + s[[r0, c0]];
    sum / ((r1 - r0) * (c1 - c0)) as f64
}

/// `|mean3x3 - mean21x21|` scaled so the frame maximum is 1 (all zero for a flat image).
pub fn local_contrast(img: &Array2<f64>) -> Array2<f64> {
    let s = integral(img);
    let raw = Array2::from_shape_fn(img.dim(), |(r, c)| {
        (box_mean(&s, r, c, INNER_RADIUS) - box_mean(&s, r, c, OUTER_RADIUS)).abs()
    });
    let max = raw.iter().copied().fold(0.0, f64::max);
    // summed-area differences leave ~1e-13 residue on flat images
    if max <= 1e-9 {
        return Array2::zeros(img.dim());
    }
    raw.mapv(|v| (v / max).clamp(0.0, 1.0))
}

/// Classical stand-in for a learned saliency model: center-surround luminance contrast.
pub fn fallback_saliency(frame: &VideoFrame) -> Array2<f64> {
    local_contrast(&frame.luma())
}
