//! Second-moment shape descriptors of a rendered phosphene.

use super::PerceptFrame;
use crate::retina::PerceptGrid;
use serde::{Deserialize, Serialize};

/// Brightness-weighted second-moment ellipse, in retinal micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEllipse {
    pub mass: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Standard deviation along the major axis.
    pub major_sigma: f64,
    pub minor_sigma: f64,
    /// Orientation of the major axis in radians, in (-pi/2, pi/2].
    pub angle: f64,
}

impl MomentEllipse {
    pub fn axis_ratio(&self) -> f64 {
        self.major_sigma / self.minor_sigma
    }

    /// Width of the isotropic Gaussian with the same total second moment.
    pub fn fitted_sigma(&self) -> f64 {
        ((self.major_sigma.powi(2) + self.minor_sigma.powi(2)) / 2.0).sqrt()
    }

    /// Unsigned angle between the major axis and direction `(dx, dy)`, in degrees [0, 90].
    pub fn angle_to_deg(&self, dx: f64, dy: f64) -> f64 {
        let mut d = (self.angle - dy.atan2(dx)).to_degrees().rem_euclid(180.0);
        if d > 90.0 {
            d = 180.0 - d;
        }
        d
    }
}

/// Moments of `frame` over the soma positions of `grid`. `None` for a black frame.
pub fn moment_ellipse(frame: &PerceptFrame, grid: &PerceptGrid) -> Option<MomentEllipse> {
    let somata = grid.soma_positions();
    let mass: f64 = frame.brightness.iter().sum();
    if mass <= 0.0 {
        return None;
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for (b, p) in frame.brightness.iter().zip(somata) {
        cx += b * p.x;
        cy += b * p.y;
    }
    cx /= mass;
    cy /= mass;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (b, p) in frame.brightness.iter().zip(somata) {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += b * dx * dx;
        syy += b * dy * dy;
        sxy += b * dx * dy;
    }
    sxx /= mass;
    syy /= mass;
    sxy /= mass;
    let half_trace = (sxx + syy) / 2.0;
    let disc = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let major = half_trace + disc;
    let minor = (half_trace - disc).max(0.0);
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(MomentEllipse {
        mass,
        center_x: cx,
        center_y: cy,
        major_sigma: major.sqrt(),
        minor_sigma: minor.sqrt(),
        angle,
    })
}
