//! Reward models fitted on factual data (`R̂`) or factual plus annotation data (`R̂⁺`).
//!
//! Every model caches its prediction for every `(context, action)` pair, so
//! evaluation is a table lookup regardless of the model kind.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::annotations::AugmentedDataset;
use crate::bandit::{ActionId, ContextId, Dataset, EnvSpec, FeatureMap, Observation, Policy, Shape};
use crate::error::{OpeError, Result};
use crate::rng::{ksum, rng_from_seed, KahanSum};

/// One regression target: a factual reward or an annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRow {
    /// Index of the logged sample the row came from.
    pub sample: usize,
    pub context: ContextId,
    pub action: ActionId,
    pub target: f64,
    pub weight: f64,
    pub is_annotation: bool,
}

/// Rows of a factual dataset, each with unit weight.
pub fn rows_from_dataset(dataset: &Dataset) -> Vec<TrainingRow> {
    dataset
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| TrainingRow { sample: i, context: x.context, action: x.action, target: x.reward, weight: 1.0, is_annotation: false })
        .collect()
}

/// Rows of an augmented dataset: the factual reward followed by each annotation,
/// carrying the sample's weight for that action.
pub fn rows_from_augmented(aug: &AugmentedDataset) -> Vec<TrainingRow> {
    let mut rows = Vec::with_capacity(aug.n_factual() + aug.m_annotations());
    for (i, x) in aug.samples.iter().enumerate() {
        let f = x.factual;
        rows.push(TrainingRow { sample: i, context: f.context, action: f.action, target: f.reward, weight: x.weights[f.action], is_annotation: false });
        for (a, g) in x.annotations.iter() {
            rows.push(TrainingRow { sample: i, context: f.context, action: a, target: g, weight: x.weights[a], is_annotation: true });
        }
    }
    rows
}

/// Replace each sample's context by the environment's observation of it.
/// Rows from the same sample share one observed context.
pub fn observe_rows(rows: &mut [TrainingRow], observation: Observation, n_contexts: usize, seed: u64) {
    if observation == Observation::Identity {
        return;
    }
    let mut rng = rng_from_seed(seed);
    let mut current: Option<(usize, ContextId)> = None;
    for row in rows.iter_mut() {
        let observed = match current {
            Some((i, o)) if i == row.sample => o,
            _ => {
                let o = observation.apply(row.context, n_contexts, &mut rng);
                current = Some((row.sample, o));
                o
            }
        };
        row.context = observed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TabularMean,
    TabularWeightedMean,
    Linear,
    /// Predictions supplied directly.
    Fixed,
}

/// Summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Factual rows per pair, `N_{s,a}`.
    pub factual_counts: Vec<usize>,
    /// Annotation rows per pair, `M_{s,a}`.
    pub annotation_counts: Vec<usize>,
    pub rss: f64,
    pub well_specified: bool,
    /// Pairs with entries whose weights sum to zero (predicted by the fallback).
    pub zero_weight_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    kind: ModelKind,
    shape: Shape,
    predictions: Vec<f64>,
    coefficients: Option<Vec<f64>>,
    fallback: f64,
    report: FitReport,
}

impl RewardModel {
    /// Model with given predictions for every pair.
    pub fn fixed(shape: Shape, predictions: Vec<f64>) -> Result<Self> {
        if predictions.len() != shape.cells() {
            return Err(OpeError::Shape("prediction table must cover every pair".into()));
        }
        if predictions.iter().any(|p| !p.is_finite()) {
            return Err(OpeError::Config("predictions must be finite".into()));
        }
        Ok(Self {
            kind: ModelKind::Fixed,
            shape,
            predictions,
            coefficients: None,
            fallback: 0.0,
            report: FitReport { factual_counts: vec![0; shape.cells()], annotation_counts: vec![0; shape.cells()], rss: 0.0, well_specified: false, zero_weight_cells: 0 },
        })
    }

    /// Model that predicts the true mean reward.
    pub fn truth(env: &EnvSpec) -> Self {
        let mut m = Self::fixed(env.shape(), env.mean_table().to_vec()).expect("environment means are finite");
        m.report.well_specified = true;
        m
    }

    /// Model predicting `c` everywhere.
    pub fn constant(shape: Shape, c: f64) -> Self {
        Self::fixed(shape, vec![c; shape.cells()]).expect("constant is finite")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn report(&self) -> &FitReport {
        &self.report
    }
    pub fn fallback(&self) -> f64 {
        self.fallback
    }
    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }
    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn set_well_specified(&mut self, well_specified: bool) {
        self.report.well_specified = well_specified;
    }

    #[inline]
    pub fn predict(&self, s: ContextId, a: ActionId) -> f64 {
        self.predictions[self.shape.idx(s, a)]
    }

    /// `Σ_a π(a|s) R̂(s,a)`.
    pub fn predict_policy(&self, s: ContextId, pi: &Policy) -> f64 {
        ksum((0..self.shape.n_actions).map(|a| pi.prob(s, a) * self.predict(s, a)))
    }

    /// Model with every prediction shifted by `k`.
    pub fn shifted(&self, k: f64) -> Self {
        let mut m = self.clone();
        m.predictions.iter_mut().for_each(|p| *p += k);
        m.fallback += k;
        m
    }
}

fn check_rows(rows: &[TrainingRow], shape: Shape) -> Result<()> {
    if rows.is_empty() {
        return Err(OpeError::Empty("no training rows".into()));
    }
    if rows.iter().any(|r| r.context >= shape.n_contexts || r.action >= shape.n_actions) {
        return Err(OpeError::Shape("training row outside the environment".into()));
    }
    Ok(())
}

fn counts(rows: &[TrainingRow], shape: Shape) -> (Vec<usize>, Vec<usize>) {
    let mut n = vec![0; shape.cells()];
    let mut m = vec![0; shape.cells()];
    for r in rows {
        let c = shape.idx(r.context, r.action);
        if r.is_annotation {
            m[c] += 1;
        } else {
            n[c] += 1;
        }
    }
    (n, m)
}

fn rss(rows: &[TrainingRow], shape: Shape, predictions: &[f64]) -> f64 {
    ksum(rows.iter().map(|r| (r.target - predictions[shape.idx(r.context, r.action)]).powi(2)))
}

/// Weighted mean computed with weights relative to the first positive weight,
/// so that equal weights reproduce the unweighted mean bit for bit.
fn relative_weighted_mean<'a>(entries: impl Iterator<Item = &'a TrainingRow> + Clone) -> Option<f64> {
    let reference = entries.clone().map(|r| r.weight).find(|&w| w > 0.0)?;
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for r in entries {
        let w = r.weight / reference;
        num.add(w * r.target);
        den.add(w);
    }
    Some(num.total() / den.total())
}

fn tabular(rows: &[TrainingRow], shape: Shape, weighted: bool) -> Result<RewardModel> {
    check_rows(rows, shape)?;
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); shape.cells()];
    for (i, r) in rows.iter().enumerate() {
        by_cell[shape.idx(r.context, r.action)].push(i);
    }
    let fallback = if weighted {
        relative_weighted_mean(rows.iter()).unwrap_or_else(|| ksum(rows.iter().map(|r| r.target)) / rows.len() as f64)
    } else {
        ksum(rows.iter().map(|r| r.target)) / rows.len() as f64
    };
    let mut zero_weight_cells = 0;
    let predictions: Vec<f64> = by_cell
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                return fallback;
            }
            if weighted {
                match relative_weighted_mean(idx.iter().map(|&i| &rows[i])) {
                    Some(m) => m,
                    None => {
                        zero_weight_cells += 1;
                        fallback
                    }
                }
            } else {
                ksum(idx.iter().map(|&i| rows[i].target)) / idx.len() as f64
            }
        })
        .collect();
    let (n, m) = counts(rows, shape);
    let rss = rss(rows, shape, &predictions);
    Ok(RewardModel {
        kind: if weighted { ModelKind::TabularWeightedMean } else { ModelKind::TabularMean },
        shape,
        predictions,
        coefficients: None,
        fallback,
        report: FitReport { factual_counts: n, annotation_counts: m, rss, well_specified: true, zero_weight_cells },
    })
}

/// Per-pair arithmetic mean of all targets; unseen pairs get the global mean.
pub fn fit_tabular_mean(rows: &[TrainingRow], shape: Shape) -> Result<RewardModel> {
    tabular(rows, shape, false)
}

/// Per-pair weighted mean `Σ w c / Σ w`; pairs whose weights sum to zero are
/// treated as unseen.
pub fn fit_tabular_weighted_mean(rows: &[TrainingRow], shape: Shape) -> Result<RewardModel> {
    tabular(rows, shape, true)
}

/// Ordinary least squares on `(φ(s,a), target)`, every row weighted equally.
///
/// Features that never fire get coefficient 0. The normal equations are solved
/// by Cholesky; if the system is singular the minimum-norm solution is taken.
pub fn fit_linear(rows: &[TrainingRow], shape: Shape, map: Arc<dyn FeatureMap>) -> Result<RewardModel> {
    linear(rows, shape, map, false)
}

/// Weighted least squares with each row's weight; otherwise as [`fit_linear`].
pub fn fit_weighted_linear(rows: &[TrainingRow], shape: Shape, map: Arc<dyn FeatureMap>) -> Result<RewardModel> {
    linear(rows, shape, map, true)
}

fn linear(rows: &[TrainingRow], shape: Shape, map: Arc<dyn FeatureMap>, weighted: bool) -> Result<RewardModel> {
    check_rows(rows, shape)?;
    let d = map.dim();
    if d == 0 {
        return Err(OpeError::Config("feature map has dimension 0".into()));
    }
    let mut xtx = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    let mut buf = vec![0.0; d];
    let mut nz: Vec<usize> = Vec::with_capacity(d);
    for r in rows {
        let w = if weighted { r.weight } else { 1.0 };
        if w == 0.0 {
            continue;
        }
        map.write(r.context, r.action, &mut buf);
        nz.clear();
        nz.extend((0..d).filter(|&j| buf[j] != 0.0));
        for &j in &nz {
            xty[j] += w * buf[j] * r.target;
            for &k in &nz {
                xtx[j * d + k] += w * buf[j] * buf[k];
            }
        }
    }
    let active: Vec<usize> = (0..d).filter(|&j| xtx[j * d + j] > 0.0).collect();
    let k = active.len();
    let mut coef = vec![0.0; d];
    if k > 0 {
        let a = DMatrix::from_fn(k, k, |i, j| xtx[active[i] * d + active[j]]);
        let b = DVector::from_fn(k, |i, _| xty[active[i]]);
        let sol = match a.clone().cholesky() {
            Some(ch) if ch.l().diagonal().iter().all(|x| x.is_finite() && *x > 1e-7 * a.diagonal().amax().sqrt()) => ch.solve(&b),
            _ => {
                let eps = 1e-12 * a.amax().max(1.0) * k as f64;
                a.svd(true, true).solve(&b, eps).map_err(|e| OpeError::Config(format!("least-squares solve failed: {e}")))?
            }
        };
        for (i, &j) in active.iter().enumerate() {
            coef[j] = sol[i];
        }
    }
    let mut predictions = vec![0.0; shape.cells()];
    for s in 0..shape.n_contexts {
        for a in 0..shape.n_actions {
            map.write(s, a, &mut buf);
            predictions[shape.idx(s, a)] = ksum((0..d).filter(|&j| buf[j] != 0.0).map(|j| buf[j] * coef[j]));
        }
    }
    let (n, m) = counts(rows, shape);
    let rss = rss(rows, shape, &predictions);
    Ok(RewardModel {
        kind: ModelKind::Linear,
        shape,
        predictions,
        coefficients: Some(coef),
        fallback: 0.0,
        report: FitReport { factual_counts: n, annotation_counts: m, rss, well_specified: map.well_specified(), zero_weight_cells: 0 },
    })
}

/// `Σ_a π(a|s) R̂(s,a)`.
pub fn predict_policy(model: &RewardModel, s: ContextId, pi: &Policy) -> f64 {
    model.predict_policy(s, pi)
}
