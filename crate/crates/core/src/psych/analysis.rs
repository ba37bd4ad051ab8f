//! Scoring of recorded sessions: per-condition metrics and bootstrap comparisons.

use super::sdt::metrics_report;
use super::stats::{bootstrap_diff, fdr_adjust};
use super::{
    FdrMode, MetricsReport, ParamCell, Pooling, PsychError, RateCorrection, ResponseEnvelope, SessionPlan,
    StatTestResult, TrialRecord, DEFAULT_RESAMPLES,
};
use crate::render::PAPER_GRID_SIZES;
use crate::scene::Strategy;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub pooling: Pooling,
    pub fdr_mode: FdrMode,
    pub correction: RateCorrection,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            pooling: Pooling::default(),
            fdr_mode: FdrMode::default(),
            correction: RateCorrection::default(),
            n_resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

/// One subject's plan and recorded responses.
#[derive(Debug, Clone)]
pub struct SubjectData {
    pub plan: SessionPlan,
    pub responses: Vec<ResponseEnvelope>,
    /// Optional between-subject label (for example a simulated responder policy).
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub subject_id: String,
    pub answered: usize,
    pub expected: usize,
    pub duplicates_ignored: usize,
    pub unknown_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub subject_id: String,
    pub group: Option<String>,
    pub param_cell: ParamCell,
    /// `None` pools over strategies.
    pub strategy: Option<Strategy>,
    /// `None` pools over grid sizes.
    pub grid: Option<usize>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub metrics: Vec<MetricsRow>,
    pub stats: Vec<StatTestResult>,
    pub coverage: Vec<Coverage>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn overall(&self, subject_id: &str) -> Option<&MetricsReport> {
        self.metrics
            .iter()
            .find(|m| m.subject_id == subject_id && m.strategy.is_none() && m.grid.is_none())
            .map(|m| &m.metrics)
    }

    pub fn stat(&self, comparison: &str) -> Option<&StatTestResult> {
        self.stats.iter().find(|s| s.comparison == comparison)
    }
}

/// Joins main-trial responses with the plan's ground truth. The first response per trial wins.
pub fn join_records(plan: &SessionPlan, responses: &[ResponseEnvelope]) -> (Vec<TrialRecord>, Coverage) {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut cov = Coverage {
        subject_id: plan.subject_id.clone(),
        answered: 0,
        expected: plan.trials.len(),
        duplicates_ignored: 0,
        unknown_trials: 0,
    };
    for env in responses.iter().filter(|e| !e.practice) {
        let Some(spec) = plan.trials.get(env.trial_index) else {
            cov.unknown_trials += 1;
            continue;
        };
        if env.session_id != plan.subject_id {
            cov.unknown_trials += 1;
            continue;
        }
        if !seen.insert(env.trial_index) {
            cov.duplicates_ignored += 1;
            continue;
        }
        records.push(TrialRecord {
            trial_index: env.trial_index,
            response: env.payload.response,
            confidence: env.payload.confidence,
            response_time_ms: env.payload.response_time_ms,
            ground_truth: spec.ground_truth,
        });
    }
    cov.answered = records.len();
    (records, cov)
}

/// Responses read from a session log.
#[derive(Debug, Clone, Default)]
pub struct LogRead {
    pub envelopes: Vec<ResponseEnvelope>,
    pub warnings: Vec<String>,
}

/// Reads a JSON-lines response log. An unparseable final line (an interrupted
/// write) is skipped with a warning; an unparseable line elsewhere is an error.
pub fn read_response_log(path: &Path) -> Result<LogRead, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let lines: Vec<&str> = text.split('\n').collect();
    let mut out = LogRead::default();
    let last_content = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResponseEnvelope>(line) {
            Ok(env) => out.envelopes.push(env),
            Err(e) if Some(i) == last_content => {
                out.warnings.push(format!("{}: skipped truncated final line {}: {e}", path.display(), i + 1));
            }
            Err(e) => return Err(format!("{}: line {} is corrupt: {e}", path.display(), i + 1)),
        }
    }
    Ok(out)
}

fn d_primes(rows: &[&MetricsRow]) -> Vec<Option<f64>> {
    rows.iter().map(|r| r.metrics.d_prime).collect()
}

/// Scores every subject and runs the standard comparisons on per-subject d':
/// strategies and grid sizes within subjects (paired), rho, lambda and
/// subject groups between subjects. All p values are FDR adjusted together.
pub fn analyze(subjects: &[SubjectData], cfg: &AnalysisConfig) -> Result<AnalysisReport, PsychError> {
    let mut metrics = Vec::new();
    let mut coverage = Vec::new();
    let mut warnings = Vec::new();
    let score = |recs: &[TrialRecord]| metrics_report(recs, cfg.pooling, cfg.correction, cfg.fdr_mode);

    for s in subjects {
        let (records, cov) = join_records(&s.plan, &s.responses);
        if cov.answered < cov.expected {
            warnings.push(format!(
                "IncompleteSession: {} answered {} of {} trials",
                cov.subject_id, cov.answered, cov.expected
            ));
        }
        let row = |strategy: Option<Strategy>, grid: Option<usize>| {
            let subset: Vec<TrialRecord> = records
                .iter()
                .filter(|r| {
                    let spec = &s.plan.trials[r.trial_index];
                    strategy.is_none_or(|x| spec.strategy == x) && grid.is_none_or(|g| spec.grid == g)
                })
                .cloned()
                .collect();
            MetricsRow {
                subject_id: s.plan.subject_id.clone(),
                group: s.group.clone(),
                param_cell: s.plan.param_cell,
                strategy,
                grid,
                metrics: score(&subset),
            }
        };
        metrics.push(row(None, None));
        for st in Strategy::ALL {
            metrics.push(row(Some(st), None));
            for g in PAPER_GRID_SIZES {
                metrics.push(row(Some(st), Some(g)));
            }
        }
        for g in PAPER_GRID_SIZES {
            metrics.push(row(None, Some(g)));
        }
        coverage.push(cov);
    }
    if metrics.is_empty() {
        return Err(PsychError::NoTrials);
    }

    let subject_ids: Vec<&str> = subjects.iter().map(|s| s.plan.subject_id.as_str()).collect();
    let pick = |strategy: Option<Strategy>, grid: Option<usize>| -> Vec<&MetricsRow> {
        subject_ids
            .iter()
            .filter_map(|id| metrics.iter().find(|m| m.subject_id == *id && m.strategy == strategy && m.grid == grid))
            .collect()
    };

    let mut tests: Vec<(String, Vec<f64>, Vec<f64>, bool)> = Vec::new();
    let paired = |a: Vec<Option<f64>>, b: Vec<Option<f64>>| -> (Vec<f64>, Vec<f64>) {
        a.into_iter().zip(b).filter_map(|(x, y)| Some((x?, y?))).unzip()
    };
    for (i, &sa) in Strategy::ALL.iter().enumerate() {
        for &sb in &Strategy::ALL[i + 1..] {
            let (a, b) = paired(d_primes(&pick(Some(sa), None)), d_primes(&pick(Some(sb), None)));
            tests.push((format!("strategy {} - {}", sa.name(), sb.name()), a, b, true));
        }
    }
    for (i, &ga) in PAPER_GRID_SIZES.iter().enumerate() {
        for &gb in &PAPER_GRID_SIZES[i + 1..] {
            let (a, b) = paired(d_primes(&pick(None, Some(ga))), d_primes(&pick(None, Some(gb))));
            tests.push((format!("grid {ga} - {gb}"), a, b, true));
        }
    }
    let overall = pick(None, None);
    let by = |key: &dyn Fn(&MetricsRow) -> String| -> BTreeMap<String, Vec<f64>> {
        let mut m: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &overall {
            if let Some(d) = r.metrics.d_prime {
                m.entry(key(r)).or_default().push(d);
            }
        }
        m
    };
    let between = |name: &str, groups: BTreeMap<String, Vec<f64>>, order: &[String], tests: &mut Vec<_>| {
        for (i, a) in order.iter().enumerate() {
            for b in &order[i + 1..] {
                let ga = groups.get(a).cloned().unwrap_or_default();
                let gb = groups.get(b).cloned().unwrap_or_default();
                tests.push((format!("{name} {a} - {b}"), ga, gb, false));
            }
        }
    };
    let uniq = |f: &dyn Fn(&MetricsRow) -> String| -> Vec<String> {
        let mut seen = Vec::new();
        for r in &overall {
            let k = f(r);
            if !seen.contains(&k) {
                seen.push(k);
            }
        }
        seen
    };
    let rho = |r: &MetricsRow| format!("{}", r.param_cell.rho_um);
    let lambda = |r: &MetricsRow| format!("{}", r.param_cell.lambda_um);
    let mut rhos = uniq(&rho);
    rhos.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    let mut lambdas = uniq(&lambda);
    lambdas.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    between("rho", by(&rho), &rhos, &mut tests);
    between("lambda", by(&lambda), &lambdas, &mut tests);
    let group = |r: &MetricsRow| r.group.clone().unwrap_or_default();
    let groups: BTreeSet<String> = overall.iter().filter_map(|r| r.group.clone()).collect();
    if groups.len() > 1 {
        let order: Vec<String> = groups.into_iter().collect();
        between("group", by(&group), &order, &mut tests);
    }

    let mut stats = Vec::new();
    for (k, (name, a, b, is_paired)) in tests.into_iter().enumerate() {
        match bootstrap_diff(&a, &b, cfg.n_resamples, cfg.seed.wrapping_add(k as u64), is_paired) {
            Ok(mut r) => {
                r.comparison = name;
                stats.push(r);
            }
            Err(e) => warnings.push(format!("skipped {name}: {e}")),
        }
    }
    let adjusted = fdr_adjust(&stats.iter().map(|s| s.boot_p).collect::<Vec<_>>())?;
    for (s, p) in stats.iter_mut().zip(adjusted) {
        s.fdr_adjusted_p = p;
    }
    Ok(AnalysisReport { metrics, stats, coverage, warnings })
}
