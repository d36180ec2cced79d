//! One trial: draw the evaluation and fitting datasets, fit reward models and
//! evaluate every configured estimator.
//!
//! Datasets, availability patterns and annotation noise are seeded by
//! `(root seed, pair, trial)` only, so cells that differ in annotation bias or
//! excess variance share them.

use crate::annotations::{annotate, assign_weights, AugmentedDataset};
use crate::bandit::{sample_dataset, Dataset};
use crate::environments::{FittingSpec, ModelFamily};
use crate::error::Result;
use crate::estimators::{evaluate, EstimatorId, EstimatorInputs};
use crate::reward_model::{
    fit_linear, fit_tabular_mean, fit_tabular_weighted_mean, fit_weighted_linear, observe_rows, rows_from_augmented, rows_from_dataset,
    RewardModel, TrainingRow,
};
use crate::rng::derive_seed;

use super::config::{DmModeConfig, Experiment, PairSetup, Pooling};

/// Outcome of one estimator in one trial: the estimate or the failure message.
pub type Outcome = std::result::Result<f64, String>;

/// Datasets shared by every cell of one `(pair, trial)`.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub eval: Dataset,
    pub fit: Dataset,
    root: u64,
    key: [u64; 2],
}

fn fit_model(spec: &FittingSpec, rows: &[TrainingRow], exp: &Experiment, pooling: Pooling) -> Result<RewardModel> {
    let shape = exp.env.spec.shape();
    let mut model = match (&spec.family, pooling) {
        (ModelFamily::Tabular, Pooling::Unweighted) => fit_tabular_mean(rows, shape)?,
        (ModelFamily::Tabular, Pooling::Weighted) => fit_tabular_weighted_mean(rows, shape)?,
        (ModelFamily::Linear(map), Pooling::Unweighted) => fit_linear(rows, shape, map.clone())?,
        (ModelFamily::Linear(map), Pooling::Weighted) => fit_weighted_linear(rows, shape, map.clone())?,
    };
    model.set_well_specified(spec.well_specified);
    Ok(model)
}

impl TrialDraw {
    pub fn new(exp: &Experiment, pair: &PairSetup, trial: usize) -> Result<Self> {
        let root = exp.config.seed;
        let key = [pair.index as u64, trial as u64];
        let eval = sample_dataset(&pair.problem, exp.n, derive_seed(root, "eval", &key))?;
        let fit = sample_dataset(&pair.problem, exp.n, derive_seed(root, "fit", &key))?;
        Ok(Self { eval, fit, root, key })
    }

    fn observed(&self, spec: &FittingSpec, exp: &Experiment, mut rows: Vec<TrainingRow>, tag: &str) -> Vec<TrainingRow> {
        observe_rows(&mut rows, spec.observation, exp.env.spec.n_contexts(), derive_seed(self.root, tag, &self.key));
        rows
    }

    /// Reward model fitted on the factual fitting dataset.
    pub fn factual_model(&self, exp: &Experiment, spec: &FittingSpec) -> Result<RewardModel> {
        let rows = self.observed(spec, exp, rows_from_dataset(&self.fit), "observe-factual");
        fit_model(spec, &rows, exp, Pooling::Unweighted)
    }

    /// Annotated and weighted copies of the evaluation and fitting datasets.
    pub fn augment(&self, exp: &Experiment, eps: f64, delta: f64) -> Result<(AugmentedDataset, AugmentedDataset)> {
        let model = exp.annotation_model(eps, delta)?;
        let spec = &exp.env.spec;
        let eval = annotate(&self.eval, spec, &model, derive_seed(self.root, "annotate-eval", &self.key))?;
        let fit = annotate(&self.fit, spec, &model, derive_seed(self.root, "annotate-fit", &self.key))?;
        Ok((assign_weights(&eval, &exp.scheme)?, assign_weights(&fit, &exp.scheme)?))
    }

    /// Reward model fitted on the annotated fitting dataset.
    pub fn augmented_model(&self, exp: &Experiment, spec: &FittingSpec, fit: &AugmentedDataset) -> Result<RewardModel> {
        let rows = self.observed(spec, exp, rows_from_augmented(fit), "observe-augmented");
        fit_model(spec, &rows, exp, exp.config.reward_model.pooling)
    }
}

/// Evaluate `estimators` on prepared inputs, recording failures.
pub fn evaluate_all(
    exp: &Experiment,
    pair: &PairSetup,
    draw: &TrialDraw,
    eval: &AugmentedDataset,
    model: Option<&RewardModel>,
    model_plus: Option<&RewardModel>,
    estimators: &[EstimatorId],
) -> Vec<Outcome> {
    let inputs = EstimatorInputs {
        problem: &pair.problem,
        dataset: &draw.eval,
        augmented: eval,
        pib_plus: &pair.pib_plus,
        model,
        model_plus,
        dm_sample_mode: exp.config.dm_mode == DmModeConfig::Sample,
    };
    estimators.iter().map(|&id| evaluate(id, &inputs).map(|e| e.value).map_err(|e| e.to_string())).collect()
}

/// Estimates for every cell of one `(pair, trial)`, in `cells` order, each
/// aligned with the configured estimator list.
pub fn run_trial_cells(exp: &Experiment, pair: &PairSetup, cells: &[(f64, f64)], trial: usize) -> Result<Vec<Vec<Outcome>>> {
    let estimators = &exp.config.estimators;
    let spec = exp.env.fitting(exp.config.reward_model.misspecified);
    let draw = TrialDraw::new(exp, pair, trial)?;
    let model = if estimators.iter().any(|e| e.uses_factual_model()) { Some(draw.factual_model(exp, spec)?) } else { None };
    let needs_plus = estimators.iter().any(|e| e.uses_augmented_model());
    cells
        .iter()
        .map(|&(eps, delta)| {
            let (eval, fit) = draw.augment(exp, eps, delta)?;
            let model_plus = if needs_plus { Some(draw.augmented_model(exp, spec, &fit)?) } else { None };
            Ok(evaluate_all(exp, pair, &draw, &eval, model.as_ref(), model_plus.as_ref(), estimators))
        })
        .collect()
}

/// Estimates for one cell of one `(pair, trial)`.
pub fn run_trial(exp: &Experiment, pair: &PairSetup, cell: (f64, f64), trial: usize) -> Result<Vec<(EstimatorId, Outcome)>> {
    let out = run_trial_cells(exp, pair, &[cell], trial)?.pop().unwrap_or_default();
    Ok(exp.config.estimators.iter().copied().zip(out).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::EnvKind;
    use crate::harness::config::{AvailabilityConfig, ExperimentConfig, PairSelection};

    fn exp(estimators: Vec<EstimatorId>) -> Experiment {
        ExperimentConfig { estimators, availability: Some(AvailabilityConfig::Independent { prob: 1.0 }), ..ExperimentConfig::default() }
            .resolve()
            .unwrap()
    }

    #[test]
    fn on_policy_is_is_sample_mean() {
        let cfg = ExperimentConfig { estimators: vec![EstimatorId::IS], pairs: PairSelection::Ids(vec!["p0.5/p0.5".into()]), ..Default::default() };
        let e = cfg.resolve().unwrap();
        let pair = &e.pairs[0];
        let got = run_trial(&e, pair, (0.0, 0.0), 3).unwrap();
        let draw = TrialDraw::new(&e, pair, 3).unwrap();
        let mean = draw.eval.samples.iter().map(|x| x.reward).sum::<f64>() / draw.eval.len() as f64;
        assert!((got[0].1.clone().unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn trials_are_deterministic() {
        let e = exp(EstimatorId::ALL.to_vec());
        let a = run_trial(&e, &e.pairs[4], (0.5, 1.0), 7).unwrap();
        let b = run_trial(&e, &e.pairs[4], (0.5, 1.0), 7).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&e, &e.pairs[4], (0.5, 1.0), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn equal_weights_full_annotation_equivalence() {
        let e = exp(vec![EstimatorId::ISplus, EstimatorId::DmIsPlus, EstimatorId::DmPlusIsPlus]);
        for pair in &e.pairs {
            let out = run_trial(&e, pair, (0.0, 0.0), 1).unwrap();
            let v: Vec<f64> = out.iter().map(|(_, o)| o.clone().unwrap()).collect();
            assert!((v[0] - v[1]).abs() < 1e-10 && (v[0] - v[2]).abs() < 1e-10, "{v:?}");
        }
    }

    #[test]
    fn cells_share_availability_and_noise() {
        let e = ExperimentConfig::for_env(EnvKind::Sepsis).resolve().unwrap();
        let draw = TrialDraw::new(&e, &e.pairs[0], 0).unwrap();
        let (a, _) = draw.augment(&e, 0.0, 0.0).unwrap();
        let (b, _) = draw.augment(&e, 0.5, 0.0).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let xs: Vec<_> = x.annotations.iter().collect();
            let ys: Vec<_> = y.annotations.iter().collect();
            assert_eq!(xs.len(), ys.len());
            for ((ax, gx), (ay, gy)) in xs.iter().zip(&ys) {
                assert_eq!(ax, ay);
                assert!((gy - gx - 0.5).abs() < 1e-12);
            }
        }
    }
}
