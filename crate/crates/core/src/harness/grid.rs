//! Experiment grids: every `(bias, excess variance)` cell, policy pair and
//! estimator, summarized into RMSE, bias and spread with bootstrap errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{derive_seed, kmean};
use crate::stats::{bootstrap_se, population_variance};

use super::config::Experiment;
use super::trial::{run_trial_cells, Outcome};

/// Identifier used for rows pooled over every policy pair.
pub const POOLED_ID: &str = "avg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub env: String,
    pub pi_b: String,
    pub pi_e: String,
    pub estimator: String,
    pub eps_g: f64,
    pub delta_g: f64,
    pub rmse: f64,
    pub bias: f64,
    pub std: f64,
    pub se_rmse: f64,
    pub se_bias: f64,
    pub se_std: f64,
    /// Trials whose estimate succeeded.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn find(&self, pi_b: &str, pi_e: &str, estimator: &str, eps_g: f64, delta_g: f64) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.pi_b == pi_b && r.pi_e == pi_e && r.estimator == estimator && r.eps_g == eps_g && r.delta_g == delta_g)
    }

    /// Rows pooled over policy pairs.
    pub fn pooled(&self) -> impl Iterator<Item = &GridRow> {
        self.rows.iter().filter(|r| r.pi_b == POOLED_ID)
    }
}

/// Point metrics of a set of errors `estimate − truth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub bias: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ErrorMetrics {
    pub fn of(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self { rmse: f64::NAN, bias: f64::NAN, std: f64::NAN };
        }
        let bias = kmean(errors);
        let std = population_variance(errors).sqrt();
        Self { rmse: (bias * bias + std * std).sqrt(), bias, std }
    }
}

fn rmse(e: &[f64]) -> f64 {
    ErrorMetrics::of(e).rmse
}
fn bias(e: &[f64]) -> f64 {
    kmean(e)
}
fn std(e: &[f64]) -> f64 {
    population_variance(e).sqrt()
}

fn summarize(exp: &Experiment, ids: (&str, &str), cell: (f64, f64), estimator: &str, errors: &[f64], seed: u64) -> GridRow {
    let m = ErrorMetrics::of(errors);
    let se = bootstrap_se(errors, exp.config.bootstrap, seed, &[&rmse, &bias, &std]);
    GridRow {
        env: exp.env.kind.name().to_string(),
        pi_b: ids.0.to_string(),
        pi_e: ids.1.to_string(),
        estimator: estimator.to_string(),
        eps_g: cell.0,
        delta_g: cell.1,
        rmse: m.rmse,
        bias: m.bias,
        std: m.std,
        se_rmse: se[0],
        se_bias: se[1],
        se_std: se[2],
        trials: errors.len(),
    }
}

/// Raw per-trial outcomes indexed `[pair][trial][cell][estimator]`.
pub type RawOutcomes = Vec<Vec<Vec<Vec<Outcome>>>>;

/// Run every trial of every pair over `cells`.
pub fn run_raw(exp: &Experiment, cells: &[(f64, f64)]) -> Result<RawOutcomes> {
    let trials = exp.config.trials;
    exp.install(|| {
        let jobs: Vec<(usize, usize)> = (0..exp.pairs.len()).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
        let flat: Vec<Vec<Vec<Outcome>>> =
            jobs.par_iter().map(|&(p, t)| run_trial_cells(exp, &exp.pairs[p], cells, t)).collect::<Result<_>>()?;
        let mut it = flat.into_iter();
        Ok((0..exp.pairs.len()).map(|_| it.by_ref().take(trials).collect()).collect())
    })?
}

/// Errors of estimator `k` in cell `c` for pair `p`, skipping failed trials.
fn errors(exp: &Experiment, raw: &RawOutcomes, p: usize, c: usize, k: usize) -> Vec<f64> {
    let truth = exp.pairs[p].truth;
    raw[p].iter().filter_map(|t| t[c][k].as_ref().ok()).map(|v| v - truth).collect()
}

/// Run the full grid. Rows are ordered by pair (pooled rows last), then cell,
/// then estimator.
pub fn run_grid(exp: &Experiment) -> Result<GridResult> {
    let cells = exp.cells();
    let raw = run_raw(exp, &cells)?;
    let n_est = exp.config.estimators.len();
    let root = exp.config.seed;
    let mut keys: Vec<(Option<usize>, usize, usize)> = Vec::new();
    for p in 0..exp.pairs.len() {
        keys.extend((0..cells.len()).flat_map(|c| (0..n_est).map(move |k| (Some(p), c, k))));
    }
    keys.extend((0..cells.len()).flat_map(|c| (0..n_est).map(move |k| (None, c, k))));
    let rows = exp.install(|| {
        keys.par_iter()
            .map(|&(p, c, k)| {
                let name = exp.config.estimators[k].name();
                match p {
                    Some(p) => {
                        let pair = &exp.pairs[p];
                        let seed = derive_seed(root, "bootstrap", &[pair.index as u64, c as u64, k as u64]);
                        summarize(exp, (&pair.behavior_id, &pair.target_id), cells[c], name, &errors(exp, &raw, p, c, k), seed)
                    }
                    None => {
                        let pooled: Vec<f64> = (0..exp.pairs.len()).flat_map(|p| errors(exp, &raw, p, c, k)).collect();
                        let seed = derive_seed(root, "bootstrap-pooled", &[c as u64, k as u64]);
                        summarize(exp, (POOLED_ID, POOLED_ID), cells[c], name, &pooled, seed)
                    }
                }
            })
            .collect()
    })?;
    Ok(GridResult { rows })
}
