//! Signal-detection and classification scores of yes/no target reports.

use super::{PsychError, TrialRecord};
use serde::{Deserialize, Serialize};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

// Acklam's rational approximation (relative error below 1.2e-9), refined below.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771910e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile `z` of the standard normal with `Phi(z) = p`.
///
/// Acklam's approximation followed by two Halley steps against an
/// `erfc`-based CDF, which brings `|Phi(z) - p|` to rounding level.
pub fn inverse_normal_cdf(p: f64) -> Result<f64, PsychError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PsychError::Domain(p));
    }
    let mut x = acklam(p);
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
        x -= u / (1.0 + x * u / 2.0);
    }
    Ok(x)
}

/// How the two questions of a trial become detection events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One people event and one cars event per trial.
    #[default]
    PerTargetType,
    /// A single "any target" event per trial.
    PerTrialAny,
}

/// Denominator of the second rate in d'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdrMode {
    /// False discoveries over all "present" reports.
    #[default]
    PaperFdr,
    /// False discoveries over all target-absent events (classic false-alarm rate).
    FalseAlarm,
}

/// Treatment of rates of exactly 0 or 1, whose normal quantile is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCorrection {
    None,
    /// Replace 0 by `1/(2N)` and 1 by `1 - 1/(2N)`, `N` the rate's denominator.
    #[default]
    #[serde(alias = "log_linear")]
    HalfCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub hits: u64,
    pub misses: u64,
    pub false_discoveries: u64,
    pub correct_rejections: u64,
    pub yes_responses: u64,
    pub signal_events: u64,
    pub noise_events: u64,
}

impl DetectionCounts {
    pub fn total(&self) -> u64 {
        self.signal_events + self.noise_events
    }

    fn add(&mut self, present: bool, reported: bool) {
        match (present, reported) {
            (true, true) => self.hits += 1,
            (true, false) => self.misses += 1,
            (false, true) => self.false_discoveries += 1,
            (false, false) => self.correct_rejections += 1,
        }
        self.signal_events += present as u64;
        self.noise_events += !present as u64;
        self.yes_responses += reported as u64;
    }
}

pub fn compute_counts(records: &[TrialRecord], pooling: Pooling) -> DetectionCounts {
    let mut c = DetectionCounts::default();
    for r in records {
        let (gt, resp) = (r.ground_truth, r.response);
        match pooling {
            Pooling::PerTargetType => {
                c.add(gt.has_people, resp.saw_people);
                c.add(gt.has_cars, resp.saw_cars);
            }
            Pooling::PerTrialAny => {
                c.add(gt.has_people || gt.has_cars, resp.saw_people || resp.saw_cars);
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdtRates {
    /// Observed rates, before any correction.
    pub hit_rate: f64,
    pub fdr: f64,
    pub d_prime: f64,
    pub correction_applied: bool,
}

fn corrected(num: u64, den: u64, correction: RateCorrection, what: &'static str) -> Result<(f64, f64, bool), PsychError> {
    if den == 0 {
        return Err(PsychError::UndefinedRate(what));
    }
    let n = den as f64;
    let raw = num as f64 / n;
    if raw > 0.0 && raw < 1.0 {
        return Ok((raw, raw, false));
    }
    match correction {
        RateCorrection::None => Err(PsychError::UndefinedRate(what)),
        RateCorrection::HalfCount => {
            let adj = if raw == 0.0 { 1.0 / (2.0 * n) } else { 1.0 - 1.0 / (2.0 * n) };
            Ok((raw, adj, true))
        }
    }
}

/// `d' = Z(hit rate) - Z(second rate)`, the second rate chosen by `mode`.
pub fn d_prime(counts: &DetectionCounts, correction: RateCorrection, mode: FdrMode) -> Result<SdtRates, PsychError> {
    let (hit_raw, hit, c1) = corrected(counts.hits, counts.signal_events, correction, "hit rate has no signal events")?;
    let (fdr_raw, fdr, c2) = match mode {
        FdrMode::PaperFdr => corrected(counts.false_discoveries, counts.yes_responses, correction, "false discovery rate has no yes responses")?,
        FdrMode::FalseAlarm => corrected(counts.false_discoveries, counts.noise_events, correction, "false alarm rate has no noise events")?,
    };
    Ok(SdtRates {
        hit_rate: hit_raw,
        fdr: fdr_raw,
        d_prime: inverse_normal_cdf(hit)? - inverse_normal_cdf(fdr)?,
        correction_applied: c1 || c2,
    })
}

/// Scores that can be undefined (zero denominator) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_metrics(c: &DetectionCounts) -> Classification {
    let precision = ratio(c.hits, c.yes_responses);
    let recall = ratio(c.hits, c.signal_events);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Classification { accuracy: ratio(c.hits + c.correct_rejections, c.total()), precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub d_prime: Option<f64>,
    pub hit_rate: Option<f64>,
    pub fdr: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub n_trials: usize,
    pub counts: DetectionCounts,
    pub correction_applied: bool,
}

pub fn metrics_report(records: &[TrialRecord], pooling: Pooling, correction: RateCorrection, mode: FdrMode) -> MetricsReport {
    let counts = compute_counts(records, pooling);
    let cls = classification_metrics(&counts);
    let sdt = d_prime(&counts, correction, mode).ok();
    let fdr_den = match mode {
        FdrMode::PaperFdr => counts.yes_responses,
        FdrMode::FalseAlarm => counts.noise_events,
    };
    MetricsReport {
        d_prime: sdt.map(|s| s.d_prime),
        hit_rate: ratio(counts.hits, counts.signal_events),
        fdr: ratio(counts.false_discoveries, fdr_den),
        accuracy: cls.accuracy,
        precision: cls.precision,
        recall: cls.recall,
        f1: cls.f1,
        n_trials: records.len(),
        counts,
        correction_applied: sdt.is_some_and(|s| s.correction_applied),
    }
}
