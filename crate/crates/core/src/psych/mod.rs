//! Detection experiment: session plans, response records, signal-detection
//! metrics and resampling statistics.

mod analysis;
mod sdt;
mod session;
pub mod sim;
mod stats;

pub use analysis::{
    analyze, join_records, read_response_log, AnalysisConfig, AnalysisReport, Coverage, LogRead, MetricsRow, SubjectData,
};
pub use sdt::{
    classification_metrics, compute_counts, d_prime, inverse_normal_cdf, metrics_report, normal_cdf, Classification,
    DetectionCounts, FdrMode, MetricsReport, Pooling, RateCorrection, SdtRates,
};
pub use session::{
    make_session, BlindedSession, BlindedTrial, ParamCell, SessionPlan, TrialSpec, MAIN_TRIALS, PRACTICE_TRIALS,
};
pub use stats::{bootstrap_diff, bootstrap_diff_with, fdr_adjust, StatTestResult, DEFAULT_RESAMPLES};

use crate::dataset::GroundTruth;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of every JSON document exchanged with the trial UI.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsychError {
    #[error("unbalanced design: {0}")]
    UnbalancedCatalog(String),
    #[error("{0} is outside the open interval (0, 1)")]
    Domain(f64),
    #[error("rate is undefined: {0}")]
    UndefinedRate(&'static str),
    #[error("bootstrap group {0} is empty")]
    EmptyGroup(char),
    #[error("paired groups differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("p value {0} is outside [0, 1]")]
    PValueDomain(f64),
    #[error("no detection events to score")]
    NoTrials,
    #[error("invalid response: {0}")]
    InvalidResponse(String),
}

/// The two yes/no answers of the response screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub saw_people: bool,
    pub saw_cars: bool,
}

/// What the client submits for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialResponse {
    pub response: Response,
    /// 1 = not confident at all, 5 = completely confident.
    pub confidence: u8,
    pub response_time_ms: f64,
}

impl TrialResponse {
    pub fn validate(&self) -> Result<(), PsychError> {
        if !(1..=5).contains(&self.confidence) {
            return Err(PsychError::InvalidResponse(format!("confidence {} is not in 1..=5", self.confidence)));
        }
        if !(self.response_time_ms >= 0.0 && self.response_time_ms.is_finite()) {
            return Err(PsychError::InvalidResponse(format!("response_time_ms {} is invalid", self.response_time_ms)));
        }
        Ok(())
    }
}

/// One POSTed response, as stored line by line in the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseEnvelope {
    pub schema_version: u32,
    pub session_id: String,
    /// Index into the main trials, or into the practice trials when `practice` is set.
    pub trial_index: usize,
    #[serde(default)]
    pub practice: bool,
    pub payload: TrialResponse,
    /// Client clock, milliseconds since the Unix epoch.
    pub client_timestamp: f64,
}

impl ResponseEnvelope {
    pub fn validate(&self) -> Result<(), PsychError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(PsychError::InvalidResponse(format!(
                "schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !self.client_timestamp.is_finite() {
            return Err(PsychError::InvalidResponse("client_timestamp is not finite".into()));
        }
        self.payload.validate()
    }
}

/// A scored main trial: the response joined with the trial's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub response: Response,
    pub confidence: u8,
    pub response_time_ms: f64,
    pub ground_truth: GroundTruth,
}
