//! Two contexts, two actions; reward only in the first context.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{all_pairs, binary_policies, Environment, EnvKind, FittingSpec, ModelFamily};
use crate::annotations::Availability;
use crate::bandit::{EnvSpec, Observation, Shape};
use crate::error::{OpeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoContextConfig {
    /// Mean rewards of the two actions in the first context.
    pub mean_reward_first: [f64; 2],
    /// Reward standard deviations, `[context][action]`.
    pub reward_std: [[f64; 2]; 2],
    /// Corrupt the observed context when fitting reward models.
    pub misspecify: bool,
    /// Probability that a fitting sample's context is replaced by a uniform draw.
    pub corruption_prob: f64,
}

impl Default for TwoContextConfig {
    fn default() -> Self {
        Self { mean_reward_first: [1.0, 2.0], reward_std: [[0.5, 0.5], [0.5, 0.5]], misspecify: false, corruption_prob: 0.5 }
    }
}

/// Build the environment; `misspecify` sets the observation used for fitting.
pub fn build_two_context(cfg: &TwoContextConfig) -> Result<EnvSpec> {
    if !(0.0..=1.0).contains(&cfg.corruption_prob) {
        return Err(OpeError::Config("corruption_prob must lie in [0, 1]".into()));
    }
    let [m1, m2] = cfg.mean_reward_first;
    let std = cfg.reward_std.iter().flatten().copied().collect();
    let spec = EnvSpec::new("two-context", Shape::new(2, 2), vec![0.5, 0.5], vec![m1, m2, 0.0, 0.0], std)?;
    let observation = if cfg.misspecify { Observation::RandomContext { prob: cfg.corruption_prob } } else { Observation::Identity };
    spec.with_observation(observation)
}

pub(super) fn environment(cfg: &TwoContextConfig) -> Result<Environment> {
    let spec = build_two_context(&TwoContextConfig { misspecify: false, ..cfg.clone() })?;
    let suite = all_pairs(2, &binary_policies())?;
    Ok(Environment {
        kind: EnvKind::TwoContext,
        spec: Arc::new(spec),
        well_specified: FittingSpec { family: ModelFamily::Tabular, observation: Observation::Identity, well_specified: true },
        misspecified: FittingSpec {
            family: ModelFamily::Tabular,
            observation: Observation::RandomContext { prob: cfg.corruption_prob },
            well_specified: false,
        },
        suite,
        availability: Availability::Independent(vec![EnvKind::TwoContext.default_availability(); 4]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{policy_value_exact, sample_dataset, EvaluationProblem, Policy};
    use crate::estimators::estimate_is;

    #[test]
    fn value_closed_form() {
        let cfg = TwoContextConfig { mean_reward_first: [0.7, -1.3], ..Default::default() };
        let env = build_two_context(&cfg).unwrap();
        for p in [0.1, 0.5, 0.9] {
            let pi = Policy::context_free(2, &[p, 1.0 - p]).unwrap();
            let expected = 0.5 * (p * 0.7 + (1.0 - p) * -1.3);
            assert!((policy_value_exact(&env, &pi) - expected).abs() < 1e-15);
        }
        assert_eq!(env.mean(1, 0), 0.0);
        assert_eq!(env.mean(1, 1), 0.0);
    }

    #[test]
    fn observation_variants() {
        assert_eq!(build_two_context(&TwoContextConfig::default()).unwrap().observation, Observation::Identity);
        let mis = build_two_context(&TwoContextConfig { misspecify: true, ..Default::default() }).unwrap();
        assert_eq!(mis.observation, Observation::RandomContext { prob: 0.5 });
    }

    #[test]
    fn importance_sampling_recovers_value() {
        let env = Arc::new(build_two_context(&TwoContextConfig::default()).unwrap());
        let pi = Policy::context_free(2, &[0.5, 0.5]).unwrap();
        let p = EvaluationProblem::new(env.clone(), pi.clone(), pi.clone()).unwrap();
        let n = 200_000;
        let d = sample_dataset(&p, n, 3).unwrap();
        let est = estimate_is(&d, &p).unwrap().value;
        let rewards: Vec<f64> = d.samples.iter().map(|x| x.reward).collect();
        let m = rewards.iter().sum::<f64>() / n as f64;
        let sd = (rewards.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((est - policy_value_exact(&env, &pi)).abs() < 3.0 * sd / (n as f64).sqrt());
    }
}
