//! Off-policy evaluation for contextual bandits with counterfactual annotations.
//!
//! A logged dataset from a behavior policy is augmented with annotations:
//! predicted rewards for actions that were not taken. The crate provides the
//! standard importance-sampling, direct and doubly robust estimators, their
//! annotation-augmented variants, closed-form moments for checking them, the
//! three benchmark environments, and an experiment harness.

pub mod annotations;
pub mod bandit;
pub mod environments;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod oracle;
pub mod reward_model;
pub mod rng;
pub mod stats;

pub use annotations::{
    annotate, assign_weights, augmented_behavior_policy, augmented_ips_ratio, AnnotationModel, AnnotationSet,
    AugmentedBehaviorPolicy, AugmentedDataset, AugmentedSample, Availability, WeightKind, WeightScheme,
};
pub use bandit::{
    ips_ratio, policy_value_exact, policy_value_mc, sample_dataset, ActionId, ContextId, Dataset, EnvSpec,
    EvaluationProblem, FactualSample, FeatureMap, Observation, Policy, Shape,
};
pub use environments::{EnvConfig, EnvKind, Environment, PolicyPair, PolicySuite};
pub use error::{OpeError, Result};
pub use estimators::{DmMode, Estimate, EstimatorId};
pub use reward_model::{fit_linear, fit_tabular_mean, fit_weighted_linear, fit_tabular_weighted_mean, FitReport, ModelKind, RewardModel};
