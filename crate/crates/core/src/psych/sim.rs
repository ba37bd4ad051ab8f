//! Scripted participants for end-to-end checks of the experiment pipeline.

use super::{Response, ResponseEnvelope, SessionPlan, TrialResponse, TrialSpec, SCHEMA_VERSION};
use crate::dataset::GroundTruth;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Answer rules that do not look at the stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    AlwaysYes,
    AlwaysNo,
    /// Each question answered yes with probability `p_yes`.
    Random { p_yes: f64 },
    /// Reports the ground truth, except that each answer is a coin flip with probability `lapse`.
    GroundTruth { lapse: f64 },
}

impl Policy {
    pub fn answer(&self, truth: GroundTruth, rng: &mut impl Rng) -> Response {
        match *self {
            Policy::AlwaysYes => Response { saw_people: true, saw_cars: true },
            Policy::AlwaysNo => Response { saw_people: false, saw_cars: false },
            Policy::Random { p_yes } => Response { saw_people: rng.random_bool(p_yes), saw_cars: rng.random_bool(p_yes) },
            Policy::GroundTruth { lapse } => {
                with_lapse(Response { saw_people: truth.has_people, saw_cars: truth.has_cars }, lapse, rng)
            }
        }
    }
}

/// Replaces each answer by a coin flip with probability `lapse`.
pub fn with_lapse(seen: Response, lapse: f64, rng: &mut impl Rng) -> Response {
    let mut flip = |v: bool| if rng.random_bool(lapse) { rng.random_bool(0.5) } else { v };
    Response { saw_people: flip(seen.saw_people), saw_cars: flip(seen.saw_cars) }
}

/// Runs a session through `answer`, which returns `None` to skip a trial.
/// Confidence and response time are drawn at random.
pub fn simulate_session(
    plan: &SessionPlan,
    seed: u64,
    mut answer: impl FnMut(usize, &TrialSpec, &mut ChaCha8Rng) -> Option<Response>,
) -> Vec<ResponseEnvelope> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = 1.7e12;
    let mut out = Vec::new();
    for (i, t) in plan.trials.iter().enumerate() {
        let Some(response) = answer(i, t, &mut rng) else { continue };
        let response_time_ms = rng.random_range(600.0..3000.0);
        clock += 5000.0 + response_time_ms;
        out.push(ResponseEnvelope {
            schema_version: SCHEMA_VERSION,
            session_id: plan.subject_id.clone(),
            trial_index: i,
            practice: false,
            payload: TrialResponse { response, confidence: rng.random_range(1..=5), response_time_ms },
            client_timestamp: clock,
        });
    }
    out
}

/// Max-pools a brightness map onto `rows x cols` cells.
pub fn pool_max(map: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = map.dim();
    let mut out = Array2::zeros((rows, cols));
    for ((r, c), &v) in map.indexed_iter() {
        let cell = &mut out[[r * rows / h, c * cols / w]];
        if v > *cell {
            *cell = v;
        }
    }
    out
}

/// Reads people and cars off a coarse brightness map.
///
/// Bright cells (above `threshold`) are grouped 8-connected. Regions wider
/// than 60% of the map are taken as ground outlines and ignored; of the rest,
/// clearly wide regions count as cars and clearly tall ones as people.
pub fn detect_targets(map: &Array2<f64>, threshold: f64) -> Response {
    let (h, w) = map.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut resp = Response { saw_people: false, saw_cars: false };
    for ((r, c), &v) in map.indexed_iter() {
        if v <= threshold || seen[[r, c]] {
            continue;
        }
        let (mut r0, mut r1, mut c0, mut c1) = (r, r, c, c);
        let mut stack = vec![(r, c)];
        seen[[r, c]] = true;
        while let Some((y, x)) = stack.pop() {
            (r0, r1, c0, c1) = (r0.min(y), r1.max(y), c0.min(x), c1.max(x));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                    if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                        continue;
                    }
                    let (ny, nx) = (ny as usize, nx as usize);
                    if !seen[[ny, nx]] && map[[ny, nx]] > threshold {
                        seen[[ny, nx]] = true;
                        stack.push((ny, nx));
                    }
                }
            }
        }
        let (bw, bh) = ((c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64);
        if bw > 0.6 * w as f64 {
            continue;
        }
        if bw >= 1.3 * bh {
            resp.saw_cars = true;
        } else if bh >= 1.3 * bw {
            resp.saw_people = true;
        }
    }
    resp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_shapes() {
        let mut m = Array2::zeros((16, 16));
        // a car, a person and a full-width horizon line
        m.slice_mut(ndarray::s![9..11, 2..7]).fill(0.9);
        m.slice_mut(ndarray::s![4..10, 12..14]).fill(0.8);
        m.row_mut(2).fill(1.0);
        assert_eq!(detect_targets(&m, 0.3), Response { saw_people: true, saw_cars: true });
        m.slice_mut(ndarray::s![4..10, 12..14]).fill(0.0);
        assert_eq!(detect_targets(&m, 0.3), Response { saw_people: false, saw_cars: true });
        assert_eq!(detect_targets(&Array2::zeros((8, 8)), 0.3), Response { saw_people: false, saw_cars: false });
    }

    #[test]
    fn pooling_keeps_maxima() {
        let mut m = Array2::zeros((8, 8));
        m[[5, 1]] = 0.7;
        let p = pool_max(&m, 4, 4);
        assert_eq!(p[[2, 0]], 0.7);
        assert_eq!(p.sum(), 0.7);
    }

    #[test]
    fn policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = GroundTruth { has_people: true, has_cars: false };
        assert_eq!(Policy::GroundTruth { lapse: 0.0 }.answer(t, &mut rng), Response { saw_people: true, saw_cars: false });
        assert_eq!(Policy::AlwaysNo.answer(t, &mut rng), Response { saw_people: false, saw_cars: false });
        let yes = (0..4000).filter(|_| Policy::Random { p_yes: 0.5 }.answer(t, &mut rng).saw_cars).count();
        assert!((1800..2200).contains(&yes));
    }
}
