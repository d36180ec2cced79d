//! Contexts, actions, policies, datasets and the evaluation problem.
//!
//! Contexts and actions are dense integer ids. Tables indexed by a
//! `(context, action)` pair are stored row-major, `s * n_actions + a`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{OpeError, Result};
use crate::rng::{ksum, rng_from_seed, KahanSum};

pub type ContextId = usize;
pub type ActionId = usize;

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// Dense `(context, action)` table dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n_contexts: usize,
    pub n_actions: usize,
}

impl Shape {
    pub fn new(n_contexts: usize, n_actions: usize) -> Self {
        Self { n_contexts, n_actions }
    }

    #[inline]
    pub fn idx(&self, s: ContextId, a: ActionId) -> usize {
        s * self.n_actions + a
    }

    pub fn cells(&self) -> usize {
        self.n_contexts * self.n_actions
    }
}

/// Feature map `φ(s, a)` used by linear reward models.
pub trait FeatureMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Write `φ(s, a)` into `out`, which has length `dim()`.
    fn write(&self, s: ContextId, a: ActionId, out: &mut [f64]);
    /// Whether the true mean reward lies in the span of this map.
    fn well_specified(&self) -> bool;

    fn features(&self, s: ContextId, a: ActionId) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write(s, a, &mut out);
        out
    }
}

/// How the context is observed by the reward-model fitting pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observation {
    Identity,
    /// With probability `prob` the observed context is replaced by one drawn
    /// uniformly from all contexts.
    RandomContext { prob: f64 },
}

impl Observation {
    /// Observed context among `n_contexts` for true context `s`.
    pub fn apply<R: Rng + ?Sized>(&self, s: ContextId, n_contexts: usize, rng: &mut R) -> ContextId {
        match *self {
            Observation::Identity => s,
            Observation::RandomContext { prob } => {
                if rng.random::<f64>() < prob {
                    rng.random_range(0..n_contexts)
                } else {
                    s
                }
            }
        }
    }
}

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(OpeError::InvalidDistribution {
            what: what.into(),
            reason: "empty vector".into(),
        });
    }
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(OpeError::InvalidDistribution {
            what: what.into(),
            reason: format!("entry {x} outside [0, 1]"),
        });
    }
    let total = ksum(p.iter().copied());
    if (total - 1.0).abs() > PROB_TOL {
        return Err(OpeError::InvalidDistribution {
            what: what.into(),
            reason: format!("sums to {total}"),
        });
    }
    Ok(())
}

/// Draw an index from a probability vector given `u ~ U[0, 1)`.
pub(crate) fn categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            last_positive = i;
            acc += pi;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Discrete environment: context distribution plus Gaussian rewards.
#[derive(Clone)]
pub struct EnvSpec {
    pub name: String,
    shape: Shape,
    d0: Vec<f64>,
    mean_reward: Vec<f64>,
    reward_std: Vec<f64>,
    pub observation: Observation,
    /// Structured record for each context id (may be empty).
    pub context_table: Vec<Vec<f64>>,
    pub feature_map: Option<Arc<dyn FeatureMap>>,
}

impl fmt::Debug for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvSpec")
            .field("name", &self.name)
            .field("shape", &self.shape)
            .field("observation", &self.observation)
            .field("feature_map", &self.feature_map)
            .finish_non_exhaustive()
    }
}

impl EnvSpec {
    pub fn new(
        name: impl Into<String>,
        shape: Shape,
        d0: Vec<f64>,
        mean_reward: Vec<f64>,
        reward_std: Vec<f64>,
    ) -> Result<Self> {
        if shape.n_contexts == 0 || shape.n_actions == 0 {
            return Err(OpeError::Shape("environment needs at least one context and action".into()));
        }
        if d0.len() != shape.n_contexts {
            return Err(OpeError::Shape(format!("d0 has {} entries for {} contexts", d0.len(), shape.n_contexts)));
        }
        if mean_reward.len() != shape.cells() || reward_std.len() != shape.cells() {
            return Err(OpeError::Shape("reward tables must have n_contexts * n_actions entries".into()));
        }
        check_distribution("d0", &d0)?;
        if mean_reward.iter().any(|m| !m.is_finite()) {
            return Err(OpeError::Config("mean reward must be finite".into()));
        }
        if reward_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(OpeError::Config("reward std must be finite and nonnegative".into()));
        }
        Ok(Self {
            name: name.into(),
            shape,
            d0,
            mean_reward,
            reward_std,
            observation: Observation::Identity,
            context_table: Vec::new(),
            feature_map: None,
        })
    }

    pub fn with_observation(mut self, observation: Observation) -> Result<Self> {
        if let Observation::RandomContext { prob } = observation {
            if !(0.0..=1.0).contains(&prob) {
                return Err(OpeError::Config(format!("observation corruption probability {prob} outside [0, 1]")));
            }
        }
        self.observation = observation;
        Ok(self)
    }

    pub fn with_feature_map(mut self, map: Arc<dyn FeatureMap>) -> Self {
        self.feature_map = Some(map);
        self
    }

    pub fn with_context_table(mut self, table: Vec<Vec<f64>>) -> Result<Self> {
        if table.len() != self.shape.n_contexts {
            return Err(OpeError::Shape("context table must have one record per context".into()));
        }
        self.context_table = table;
        Ok(self)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn n_contexts(&self) -> usize {
        self.shape.n_contexts
    }
    pub fn n_actions(&self) -> usize {
        self.shape.n_actions
    }
    pub fn d0(&self) -> &[f64] {
        &self.d0
    }
    pub fn mean(&self, s: ContextId, a: ActionId) -> f64 {
        self.mean_reward[self.shape.idx(s, a)]
    }
    pub fn std(&self, s: ContextId, a: ActionId) -> f64 {
        self.reward_std[self.shape.idx(s, a)]
    }
    pub fn mean_table(&self) -> &[f64] {
        &self.mean_reward
    }
    pub fn std_table(&self) -> &[f64] {
        &self.reward_std
    }

    /// Average reward standard deviation under `d0` and uniform actions.
    pub fn mean_reward_std(&self) -> f64 {
        let a = self.n_actions() as f64;
        ksum((0..self.n_contexts()).flat_map(|s| {
            (0..self.n_actions()).map(move |act| (s, act))
        }).map(|(s, act)| self.d0[s] * self.std(s, act) / a))
    }

    /// Observed context for the reward-model fitting pipeline.
    pub fn observe<R: Rng + ?Sized>(&self, s: ContextId, rng: &mut R) -> ContextId {
        self.observation.apply(s, self.n_contexts(), rng)
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> ContextId {
        categorical(&self.d0, rng.random())
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, s: ContextId, a: ActionId, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean(s, a) + self.std(s, a) * z
    }
}

/// Stochastic policy: one probability vector per context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map(Vec::len).unwrap_or(0);
        if n_actions == 0 {
            return Err(OpeError::Shape("policy needs at least one context and action".into()));
        }
        let mut probs = Vec::with_capacity(rows.len() * n_actions);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(OpeError::Shape(format!("policy row {s} has {} entries, expected {n_actions}", row.len())));
            }
            check_distribution(&format!("policy row {s}"), row)?;
            probs.extend_from_slice(row);
        }
        Ok(Self { n_actions, probs })
    }

    /// The same action distribution in every context.
    pub fn context_free(n_contexts: usize, probs: &[f64]) -> Result<Self> {
        Self::new(vec![probs.to_vec(); n_contexts.max(1)])
    }

    pub fn n_contexts(&self) -> usize {
        self.probs.len() / self.n_actions
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    #[inline]
    pub fn prob(&self, s: ContextId, a: ActionId) -> f64 {
        self.probs[s * self.n_actions + a]
    }
    pub fn row(&self, s: ContextId) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: ContextId, rng: &mut R) -> ActionId {
        categorical(self.row(s), rng.random())
    }
}

/// Environment plus behavior and target policies.
#[derive(Debug, Clone)]
pub struct EvaluationProblem {
    pub env: Arc<EnvSpec>,
    pub pi_b: Policy,
    pub pi_e: Policy,
    uncovered: Vec<(ContextId, ActionId)>,
}

impl EvaluationProblem {
    pub fn new(env: Arc<EnvSpec>, pi_b: Policy, pi_e: Policy) -> Result<Self> {
        let shape = env.shape();
        for (name, p) in [("behavior", &pi_b), ("target", &pi_e)] {
            if p.n_contexts() != shape.n_contexts || p.n_actions() != shape.n_actions {
                return Err(OpeError::Shape(format!("{name} policy does not match the environment shape")));
            }
        }
        let uncovered = (0..shape.n_contexts)
            .flat_map(|s| (0..shape.n_actions).map(move |a| (s, a)))
            .filter(|&(s, a)| env.d0()[s] > 0.0 && pi_e.prob(s, a) > 0.0 && pi_b.prob(s, a) == 0.0)
            .collect();
        Ok(Self { env, pi_b, pi_e, uncovered })
    }

    /// Whether every reachable target action has positive behavior probability.
    pub fn is_covered(&self) -> bool {
        self.uncovered.is_empty()
    }

    /// Reachable pairs the target policy takes but the behavior policy never does.
    pub fn uncovered(&self) -> &[(ContextId, ActionId)] {
        &self.uncovered
    }
}

/// One logged interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactualSample {
    pub context: ContextId,
    pub action: ActionId,
    pub reward: f64,
}

/// Logged dataset drawn from the behavior policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<FactualSample>,
    pub source_seed: u64,
}

impl Dataset {
    pub fn new(samples: Vec<FactualSample>, source_seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(OpeError::Empty("dataset has no samples".into()));
        }
        if samples.iter().any(|x| !x.reward.is_finite()) {
            return Err(OpeError::Config("dataset rewards must be finite".into()));
        }
        Ok(Self { samples, source_seed })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Occurrence counts `N_{s,a}`, row-major.
    pub fn counts(&self, shape: Shape) -> Vec<usize> {
        let mut c = vec![0; shape.cells()];
        for x in &self.samples {
            c[shape.idx(x.context, x.action)] += 1;
        }
        c
    }
}

/// Importance ratio `π_e(a|s) / π_b(a|s)`, with `0/0 := 0`.
pub fn ips_ratio(problem: &EvaluationProblem, s: ContextId, a: ActionId) -> Result<f64> {
    ratio(problem.pi_e.prob(s, a), problem.pi_b.prob(s, a), s, a)
}

#[inline]
pub(crate) fn ratio(target: f64, behavior: f64, s: ContextId, a: ActionId) -> Result<f64> {
    if target == 0.0 {
        Ok(0.0)
    } else if behavior > 0.0 {
        Ok(target / behavior)
    } else {
        Err(OpeError::CoverageViolation { context: s, action: a, target })
    }
}

/// Draw `n` logged samples: `s ~ d0`, `a ~ π_b(·|s)`, `r ~ N(R̄(s,a), σ_R(s,a)²)`.
pub fn sample_dataset(problem: &EvaluationProblem, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(OpeError::Empty("requested a dataset of size 0".into()));
    }
    let mut rng = rng_from_seed(seed);
    let env = &problem.env;
    let samples = (0..n)
        .map(|_| {
            let s = env.sample_context(&mut rng);
            let a = problem.pi_b.sample(s, &mut rng);
            let reward = env.sample_reward(s, a, &mut rng);
            FactualSample { context: s, action: a, reward }
        })
        .collect();
    Dataset::new(samples, seed)
}

/// `Σ_a π(a|s) R̄(s,a)`.
pub fn context_value(env: &EnvSpec, pi: &Policy, s: ContextId) -> f64 {
    ksum((0..env.n_actions()).map(|a| pi.prob(s, a) * env.mean(s, a)))
}

/// Exact policy value `Σ_s d0(s) Σ_a π(a|s) R̄(s,a)`.
pub fn policy_value_exact(env: &EnvSpec, pi: &Policy) -> f64 {
    ksum((0..env.n_contexts()).map(|s| env.d0()[s] * context_value(env, pi, s)))
}

/// Mean of `n` on-policy reward draws under `pi`.
pub fn policy_value_mc(env: &EnvSpec, pi: &Policy, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(OpeError::Empty("Monte-Carlo value needs at least one draw".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut acc = KahanSum::new();
    for _ in 0..n {
        let s = env.sample_context(&mut rng);
        let a = pi.sample(s, &mut rng);
        acc.add(env.sample_reward(s, a, &mut rng));
    }
    Ok(acc.total() / n as f64)
}
