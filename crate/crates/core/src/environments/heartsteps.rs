//! Mobile-health step-count environment.
//!
//! The context is the previous day's square-root step count, discretized into
//! equal-width bins. Action 0 does nothing, action 1 sends a notification.
//! The mean reward is `φ(s,a)·θ` with `φ = [decay, prev, treatment·a]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{all_pairs, binary_policies, Environment, EnvKind, FittingSpec, ModelFamily};
use crate::annotations::Availability;
use crate::bandit::{ActionId, ContextId, EnvSpec, FeatureMap, Observation, Shape};
use crate::error::{OpeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeartstepsConfig {
    pub theta: [f64; 3],
    /// Value of the step-count decay coordinate.
    pub decay: f64,
    pub n_bins: usize,
    /// Range of the previous-day square-root step count covered by the bins.
    pub support: [f64; 2],
    /// Center and spread of the discretized normal context distribution.
    pub context_mean: f64,
    pub context_sd: f64,
    pub reward_std: f64,
    /// Treatment coordinate when a notification is sent.
    pub treatment: f64,
}

impl Default for HeartstepsConfig {
    fn default() -> Self {
        Self {
            theta: [-0.04, 0.9999, 0.3],
            decay: 1.0,
            n_bins: 80,
            support: [3.5, 6.5],
            context_mean: 5.0,
            context_sd: 0.5,
            reward_std: 0.25,
            treatment: 1.0,
        }
    }
}

impl HeartstepsConfig {
    /// Centers of the context bins.
    pub fn bin_centers(&self) -> Vec<f64> {
        let [lo, hi] = self.support;
        let width = (hi - lo) / self.n_bins as f64;
        (0..self.n_bins).map(|k| lo + (k as f64 + 0.5) * width).collect()
    }
}

/// `[decay, prev(s), treatment·1{a = send}]`, optionally without the last coordinate.
#[derive(Debug, Clone)]
pub struct HeartstepsFeatures {
    decay: f64,
    centers: Vec<f64>,
    treatment: f64,
    with_treatment: bool,
}

impl HeartstepsFeatures {
    pub fn new(cfg: &HeartstepsConfig, with_treatment: bool) -> Self {
        Self { decay: cfg.decay, centers: cfg.bin_centers(), treatment: cfg.treatment, with_treatment }
    }
}

impl FeatureMap for HeartstepsFeatures {
    fn dim(&self) -> usize {
        if self.with_treatment {
            3
        } else {
            2
        }
    }

    fn write(&self, s: ContextId, a: ActionId, out: &mut [f64]) {
        out[0] = self.decay;
        out[1] = self.centers[s];
        if self.with_treatment {
            out[2] = if a == 1 { self.treatment } else { 0.0 };
        }
    }

    fn well_specified(&self) -> bool {
        self.with_treatment
    }
}

pub fn build_heartsteps(cfg: &HeartstepsConfig) -> Result<EnvSpec> {
    let [lo, hi] = cfg.support;
    if cfg.n_bins == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(OpeError::Config("heartsteps needs at least one bin and an increasing support".into()));
    }
    if cfg.context_sd.is_nan() || cfg.context_sd <= 0.0 || cfg.reward_std < 0.0 {
        return Err(OpeError::Config("heartsteps spreads must be positive".into()));
    }
    let centers = cfg.bin_centers();
    let dens: Vec<f64> = centers.iter().map(|c| (-0.5 * ((c - cfg.context_mean) / cfg.context_sd).powi(2)).exp()).collect();
    let total: f64 = dens.iter().sum();
    let d0: Vec<f64> = dens.iter().map(|x| x / total).collect();
    let features = HeartstepsFeatures::new(cfg, true);
    let shape = Shape::new(cfg.n_bins, 2);
    let mut mean = vec![0.0; shape.cells()];
    for s in 0..shape.n_contexts {
        for a in 0..2 {
            let phi = features.features(s, a);
            mean[shape.idx(s, a)] = phi.iter().zip(&cfg.theta).map(|(x, t)| x * t).sum();
        }
    }
    let table = centers.iter().map(|&c| vec![c]).collect();
    Ok(EnvSpec::new("heartsteps", shape, d0, mean, vec![cfg.reward_std; shape.cells()])?
        .with_context_table(table)?
        .with_feature_map(Arc::new(features)))
}

pub(super) fn environment(cfg: &HeartstepsConfig) -> Result<Environment> {
    let spec = build_heartsteps(cfg)?;
    let suite = all_pairs(cfg.n_bins, &binary_policies())?;
    Ok(Environment {
        kind: EnvKind::Heartsteps,
        availability: Availability::Independent(vec![EnvKind::Heartsteps.default_availability(); spec.shape().cells()]),
        spec: Arc::new(spec),
        well_specified: FittingSpec {
            family: ModelFamily::Linear(Arc::new(HeartstepsFeatures::new(cfg, true))),
            observation: Observation::Identity,
            well_specified: true,
        },
        misspecified: FittingSpec {
            family: ModelFamily::Linear(Arc::new(HeartstepsFeatures::new(cfg, false))),
            observation: Observation::Identity,
            well_specified: false,
        },
        suite,
    })
}
