//! The three benchmark environments and their policy suites.

mod heartsteps;
mod sepsis;
mod two_context;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use heartsteps::{build_heartsteps, HeartstepsConfig, HeartstepsFeatures};
pub use sepsis::{build_sepsis, sepsis_context, SepsisConfig, SepsisContext, SepsisFeatures, SepsisOneHot, sepsis_policies};
pub use two_context::{build_two_context, TwoContextConfig};

use crate::annotations::Availability;
use crate::bandit::{EnvSpec, FeatureMap, Observation, Policy};
use crate::error::{OpeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    TwoContext,
    Heartsteps,
    Sepsis,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::TwoContext, EnvKind::Heartsteps, EnvKind::Sepsis];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::TwoContext => "two-context",
            EnvKind::Heartsteps => "heartsteps",
            EnvKind::Sepsis => "sepsis",
        }
    }

    /// Default number of logged samples per dataset.
    pub fn default_n(self) -> usize {
        match self {
            EnvKind::TwoContext => 100,
            EnvKind::Heartsteps => 200,
            EnvKind::Sepsis => 700,
        }
    }

    /// Default probability that a counterfactual entry is annotated.
    pub fn default_availability(self) -> f64 {
        match self {
            EnvKind::TwoContext | EnvKind::Heartsteps => 1.0,
            EnvKind::Sepsis => 0.125,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = OpeError;
    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| OpeError::Parse(format!("unknown environment `{s}`")))
    }
}

/// One behavior/target pair with stable identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    pub behavior_id: String,
    pub target_id: String,
    pub pi_b: Policy,
    pub pi_e: Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySuite {
    pub pairs: Vec<PolicyPair>,
}

impl PolicySuite {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Reward-model family used when fitting `R̂` and `R̂⁺`.
#[derive(Debug, Clone)]
pub enum ModelFamily {
    Tabular,
    Linear(Arc<dyn FeatureMap>),
}

/// How reward models are fitted: the family plus the observation applied to
/// the fitting data's contexts.
#[derive(Debug, Clone)]
pub struct FittingSpec {
    pub family: ModelFamily,
    pub observation: Observation,
    pub well_specified: bool,
}

/// A built environment with both reward-model variants and its policy suite.
#[derive(Debug, Clone)]
pub struct Environment {
    pub kind: EnvKind,
    pub spec: Arc<EnvSpec>,
    pub well_specified: FittingSpec,
    pub misspecified: FittingSpec,
    pub suite: PolicySuite,
    /// Default availability layout for annotations.
    pub availability: Availability,
}

impl Environment {
    pub fn fitting(&self, misspecified: bool) -> &FittingSpec {
        if misspecified {
            &self.misspecified
        } else {
            &self.well_specified
        }
    }

    /// Largest minus smallest mean reward over reachable contexts.
    pub fn reward_range(&self) -> f64 {
        let shape = self.spec.shape();
        let reachable = (0..shape.n_contexts)
            .filter(|&s| self.spec.d0()[s] > 0.0)
            .flat_map(|s| (0..shape.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| self.spec.mean(s, a));
        let (lo, hi) = reachable.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)));
        hi - lo
    }
}

/// Configuration for any of the three environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    TwoContext(TwoContextConfig),
    Heartsteps(HeartstepsConfig),
    Sepsis(SepsisConfig),
}

impl EnvConfig {
    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::TwoContext => EnvConfig::TwoContext(TwoContextConfig::default()),
            EnvKind::Heartsteps => EnvConfig::Heartsteps(HeartstepsConfig::default()),
            EnvKind::Sepsis => EnvConfig::Sepsis(SepsisConfig::default()),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            EnvConfig::TwoContext(_) => EnvKind::TwoContext,
            EnvConfig::Heartsteps(_) => EnvKind::Heartsteps,
            EnvConfig::Sepsis(_) => EnvKind::Sepsis,
        }
    }

    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvConfig::TwoContext(c) => two_context::environment(c),
            EnvConfig::Heartsteps(c) => heartsteps::environment(c),
            EnvConfig::Sepsis(c) => sepsis::environment(c),
        }
    }
}

/// Every ordered pair drawn from `policies`, behavior varying slowest.
fn all_pairs(n_contexts: usize, policies: &[(&str, Vec<f64>)]) -> Result<PolicySuite> {
    all_pairs_listed(n_contexts, policies, policies)
}

/// Every `(behavior, target)` combination of two separate lists, behavior varying slowest.
fn all_pairs_listed(n_contexts: usize, behaviors: &[(&str, Vec<f64>)], targets: &[(&str, Vec<f64>)]) -> Result<PolicySuite> {
    let mut pairs = Vec::new();
    for (bid, b) in behaviors {
        for (eid, e) in targets {
            pairs.push(PolicyPair {
                behavior_id: (*bid).to_string(),
                target_id: (*eid).to_string(),
                pi_b: Policy::context_free(n_contexts, b)?,
                pi_e: Policy::context_free(n_contexts, e)?,
            });
        }
    }
    Ok(PolicySuite { pairs })
}

/// The three two-action policies used by the two-context and Heartsteps suites.
fn binary_policies() -> Vec<(&'static str, Vec<f64>)> {
    vec![("p0.1", vec![0.1, 0.9]), ("p0.5", vec![0.5, 0.5]), ("p0.9", vec![0.9, 0.1])]
}

/// Policy suite for an environment kind, built with its default configuration.
pub fn policy_suite(kind: EnvKind) -> Result<PolicySuite> {
    Ok(EnvConfig::default_for(kind).build()?.suite)
}
