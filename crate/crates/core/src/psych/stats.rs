//! Percentile bootstrap of mean differences and Benjamini-Hochberg adjustment.

use super::PsychError;
use crate::exec::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub comparison: String,
    /// `mean(A) - mean(B)`
    pub observed_diff: f64,
    pub boot_p: f64,
    pub fdr_adjusted_p: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub paired: bool,
    pub n_a: usize,
    pub n_b: usize,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Resample `i` draws from its own ChaCha stream, so the result does not
/// depend on how resamples are scheduled.
fn resample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn bootstrap_diff(a: &[f64], b: &[f64], n_resamples: usize, seed: u64, paired: bool) -> Result<StatTestResult, PsychError> {
    bootstrap_diff_with(Exec::default(), a, b, n_resamples, seed, paired)
}

/// Two-sided percentile-bootstrap test of `mean(A) - mean(B)`:
/// `p = min(1, 2 min(P(diff* <= 0), P(diff* >= 0)))`.
///
/// Paired data resample index pairs; unpaired data resample each group independently.
pub fn bootstrap_diff_with(
    exec: Exec,
    a: &[f64],
    b: &[f64],
    n_resamples: usize,
    seed: u64,
    paired: bool,
) -> Result<StatTestResult, PsychError> {
    if a.is_empty() {
        return Err(PsychError::EmptyGroup('A'));
    }
    if b.is_empty() {
        return Err(PsychError::EmptyGroup('B'));
    }
    if paired && a.len() != b.len() {
        return Err(PsychError::LengthMismatch(a.len(), b.len()));
    }
    if n_resamples == 0 {
        return Err(PsychError::InvalidResponse("n_resamples must be positive".into()));
    }
    let observed = mean(a.iter().copied()) - mean(b.iter().copied());
    let diffs = exec.map_range(n_resamples, |i| {
        let mut rng = resample_rng(seed, i);
        if paired {
            let n = a.len();
            mean((0..n).map(|_| {
                let k = rng.random_range(0..n);
                a[k] - b[k]
            }))
        } else {
            let ma = mean((0..a.len()).map(|_| a[rng.random_range(0..a.len())]));
            let mb = mean((0..b.len()).map(|_| b[rng.random_range(0..b.len())]));
            ma - mb
        }
    });
    let n = n_resamples as f64;
    let le = diffs.iter().filter(|&&d| d <= 0.0).count() as f64 / n;
    let ge = diffs.iter().filter(|&&d| d >= 0.0).count() as f64 / n;
    let p = (2.0 * le.min(ge)).min(1.0);
    Ok(StatTestResult {
        comparison: "A - B".into(),
        observed_diff: observed,
        boot_p: p,
        fdr_adjusted_p: p,
        n_resamples,
        seed,
        paired,
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// Benjamini-Hochberg step-up adjusted p values, in input order.
pub fn fdr_adjust(p: &[f64]) -> Result<Vec<f64>, PsychError> {
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(PsychError::PValueDomain(bad));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        out[i] = running.min(1.0);
    }
    Ok(out)
}
