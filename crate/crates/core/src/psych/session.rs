use super::{PsychError, SCHEMA_VERSION};
use crate::dataset::{GroundTruth, StimulusCatalog};
use crate::render::{AxonMapParams, PAPER_GRID_SIZES, PAPER_LAMBDA_UM, PAPER_RHO_UM};
use crate::scene::Strategy;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// 16 clips x 4 strategies x 3 grids.
pub const MAIN_TRIALS: usize = 192;
pub const PRACTICE_TRIALS: usize = 8;

/// One (rho, lambda) model condition, assigned per subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamCell {
    pub rho_um: f64,
    pub lambda_um: f64,
}

impl ParamCell {
    /// The nine conditions, rho-major.
    pub fn all() -> Vec<ParamCell> {
        PAPER_RHO_UM
            .iter()
            .flat_map(|&rho_um| PAPER_LAMBDA_UM.iter().map(move |&lambda_um| ParamCell { rho_um, lambda_um }))
            .collect()
    }

    /// Round-robin assignment: subject `i` gets condition `i mod 9`.
    pub fn for_subject(i: usize) -> ParamCell {
        let all = Self::all();
        all[i % all.len()]
    }

    pub fn is_paper_cell(&self) -> bool {
        PAPER_RHO_UM.contains(&self.rho_um) && PAPER_LAMBDA_UM.contains(&self.lambda_um)
    }

    pub fn params(&self) -> AxonMapParams {
        AxonMapParams { rho_um: self.rho_um, lambda_um: self.lambda_um, decay: Default::default() }
    }

    /// Stable name such as `rho300_lambda1000`.
    pub fn label(&self) -> String {
        format!("rho{}_lambda{}", self.rho_um, self.lambda_um)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSpec {
    pub clip_id: String,
    pub strategy: Strategy,
    pub grid: usize,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub schema_version: u32,
    pub subject_id: String,
    pub param_cell: ParamCell,
    pub trials: Vec<TrialSpec>,
    pub practice_trials: Vec<TrialSpec>,
    pub rng_seed: u64,
}

/// Builds the full crossed design in a seeded random order.
///
/// Practice trials cycle through the catalog's practice clips with every
/// strategy and grid represented.
pub fn make_session(
    subject_id: &str,
    catalog: &StimulusCatalog,
    param_cell: ParamCell,
    seed: u64,
) -> Result<SessionPlan, PsychError> {
    if !catalog.balanced {
        return Err(PsychError::UnbalancedCatalog(format!(
            "{} main clips with counts {:?}",
            catalog.main_clips().count(),
            catalog.category_counts()
        )));
    }
    if !param_cell.is_paper_cell() {
        return Err(PsychError::UnbalancedCatalog(format!("({}, {}) is not one of the nine conditions", param_cell.rho_um, param_cell.lambda_um)));
    }
    let practice: Vec<_> = catalog.practice_clips().collect();
    if practice.is_empty() {
        return Err(PsychError::UnbalancedCatalog("catalog has no practice clips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut trials = Vec::with_capacity(MAIN_TRIALS);
    for clip in catalog.main_clips() {
        for strategy in Strategy::ALL {
            for grid in PAPER_GRID_SIZES {
                trials.push(TrialSpec { clip_id: clip.clip_id.clone(), strategy, grid, ground_truth: clip.ground_truth() });
            }
        }
    }
    trials.shuffle(&mut rng);

    let mut practice_trials: Vec<_> = (0..PRACTICE_TRIALS)
        .map(|k| {
            let clip = practice[k % practice.len()];
            TrialSpec {
                clip_id: clip.clip_id.clone(),
                strategy: Strategy::ALL[k % Strategy::ALL.len()],
                grid: PAPER_GRID_SIZES[k % PAPER_GRID_SIZES.len()],
                ground_truth: clip.ground_truth(),
            }
        })
        .collect();
    practice_trials.shuffle(&mut rng);

    Ok(SessionPlan {
        schema_version: SCHEMA_VERSION,
        subject_id: subject_id.to_string(),
        param_cell,
        trials,
        practice_trials,
        rng_seed: seed,
    })
}

/// A trial as the participant's client sees it: no clip identity, no answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindedTrial {
    pub trial_index: usize,
    pub practice: bool,
    pub strategy: Strategy,
    pub grid: usize,
    pub stimulus_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindedSession {
    pub schema_version: u32,
    pub session_id: String,
    pub param_cell: ParamCell,
    pub n_trials: usize,
    pub n_practice: usize,
    pub practice_trials: Vec<BlindedTrial>,
    pub trials: Vec<BlindedTrial>,
}

impl SessionPlan {
    pub fn blinded(&self) -> BlindedSession {
        let id = &self.subject_id;
        let blind = |practice: bool| {
            move |(trial_index, t): (usize, &TrialSpec)| {
                let q = if practice { "?practice=true" } else { "" };
                BlindedTrial {
                    trial_index,
                    practice,
                    strategy: t.strategy,
                    grid: t.grid,
                    stimulus_url: format!("/api/stimulus/{id}/{trial_index}{q}"),
                }
            }
        };
        BlindedSession {
            schema_version: SCHEMA_VERSION,
            session_id: id.clone(),
            param_cell: self.param_cell,
            n_trials: self.trials.len(),
            n_practice: self.practice_trials.len(),
            practice_trials: self.practice_trials.iter().enumerate().map(blind(true)).collect(),
            trials: self.trials.iter().enumerate().map(blind(false)).collect(),
        }
    }

    pub fn trial(&self, index: usize, practice: bool) -> Option<&TrialSpec> {
        if practice {
            self.practice_trials.get(index)
        } else {
            self.trials.get(index)
        }
    }
}
