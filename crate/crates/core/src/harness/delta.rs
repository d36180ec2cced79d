//! Difference between DM⁺-IS and the best-performing baseline per cell.
//!
//! The baseline is DM⁺ when annotations are perfect and DM otherwise, both
//! fitted with the well-specified reward model. DM⁺-IS uses the configured one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::EstimatorId;
use crate::rng::kmean;
use crate::stats::population_variance;

use super::config::{Experiment, PairSetup};
use super::trial::{evaluate_all, TrialDraw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub env: String,
    pub eps_g: f64,
    pub delta_g: f64,
    /// Mean of `DM⁺-IS − baseline` over every pair and trial.
    pub mean_delta: f64,
    pub var_delta: f64,
    pub baseline: String,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeltaResult {
    pub rows: Vec<DeltaRow>,
}

/// Baseline estimator for a cell.
pub fn baseline_for(eps: f64, delta: f64) -> EstimatorId {
    if eps == 0.0 && delta == 0.0 {
        EstimatorId::DMplus
    } else {
        EstimatorId::DM
    }
}

fn trial_deltas(exp: &Experiment, pair: &PairSetup, cells: &[(f64, f64)], trial: usize) -> Result<Vec<Option<f64>>> {
    let draw = TrialDraw::new(exp, pair, trial)?;
    let configured = exp.env.fitting(exp.config.reward_model.misspecified);
    let well = &exp.env.well_specified;
    let base_model = draw.factual_model(exp, well)?;
    cells
        .iter()
        .map(|&(eps, delta)| {
            let (eval, fit) = draw.augment(exp, eps, delta)?;
            let model_plus = draw.augmented_model(exp, configured, &fit)?;
            let est = evaluate_all(exp, pair, &draw, &eval, None, Some(&model_plus), &[EstimatorId::DmPlusIs]);
            let baseline = match baseline_for(eps, delta) {
                EstimatorId::DMplus => {
                    let well_plus = draw.augmented_model(exp, well, &fit)?;
                    evaluate_all(exp, pair, &draw, &eval, None, Some(&well_plus), &[EstimatorId::DMplus])
                }
                id => evaluate_all(exp, pair, &draw, &eval, Some(&base_model), None, &[id]),
            };
            Ok(match (&est[0], &baseline[0]) {
                (Ok(a), Ok(b)) => Some(a - b),
                _ => None,
            })
        })
        .collect()
}

/// Δ statistics for every cell of the experiment grid, pooled over pairs and trials.
pub fn delta_analysis(exp: &Experiment) -> Result<DeltaResult> {
    let cells = exp.cells();
    let trials = exp.config.trials;
    let per_job: Vec<Vec<Option<f64>>> = exp.install(|| {
        let jobs: Vec<(usize, usize)> = (0..exp.pairs.len()).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
        jobs.par_iter().map(|&(p, t)| trial_deltas(exp, &exp.pairs[p], &cells, t)).collect::<Result<Vec<_>>>()
    })??;
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, &(eps, delta))| {
            let values: Vec<f64> = per_job.iter().filter_map(|job| job[c]).collect();
            DeltaRow {
                env: exp.env.kind.name().to_string(),
                eps_g: eps,
                delta_g: delta,
                mean_delta: if values.is_empty() { f64::NAN } else { kmean(&values) },
                var_delta: population_variance(&values),
                baseline: baseline_for(eps, delta).name().to_string(),
                trials: values.len(),
            }
        })
        .collect();
    Ok(DeltaResult { rows })
}
