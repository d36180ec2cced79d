//! Counterfactual annotations, per-sample weights and the augmented behavior policy.
//!
//! An annotation for `(s, ã)` is drawn from `N(R̄(s,ã) + ε(s,ã), σ_R(s,ã)² + Δ(s,ã))`.
//! Each logged sample spreads a unit of weight over its factual action and
//! the annotated actions; `W̄(ã | s, a)` is the expected weight on `ã` for a
//! sample whose factual action is `a`, taken over the availability draw.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandit::{ratio, ActionId, ContextId, Dataset, EnvSpec, FactualSample, Policy, Shape};
use crate::error::{OpeError, Result};
use crate::rng::{ksum, rng_from_seed};

/// Tolerance for realized and mean weight rows summing to one.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Which counterfactual entries of a sample receive an annotation.
#[derive(Debug, Clone, PartialEq)]
pub enum Availability {
    /// Independent Bernoulli draw per `(sample, counterfactual action)` with
    /// the probability stored for `(s, ã)`.
    Independent(Vec<f64>),
    /// Exactly one counterfactual action per sample, chosen uniformly.
    SingleUniform,
}

/// Bias, excess variance and availability of the annotation source.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationModel {
    shape: Shape,
    bias: Vec<f64>,
    excess_variance: Vec<f64>,
    availability: Availability,
}

impl AnnotationModel {
    pub fn new(shape: Shape, bias: Vec<f64>, excess_variance: Vec<f64>, availability: Availability) -> Result<Self> {
        if bias.len() != shape.cells() || excess_variance.len() != shape.cells() {
            return Err(OpeError::Shape("annotation tables must cover every (context, action) pair".into()));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(OpeError::Config("annotation bias must be finite".into()));
        }
        if excess_variance.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(OpeError::Config("annotation excess variance must be finite and nonnegative".into()));
        }
        if let Availability::Independent(p) = &availability {
            if p.len() != shape.cells() {
                return Err(OpeError::Shape("availability table must cover every pair".into()));
            }
            if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(OpeError::Config("availability probabilities must lie in [0, 1]".into()));
            }
        }
        Ok(Self { shape, bias, excess_variance, availability })
    }

    /// Constant bias, excess variance and independent availability everywhere.
    pub fn uniform(shape: Shape, bias: f64, excess_variance: f64, availability: f64) -> Result<Self> {
        Self::new(
            shape,
            vec![bias; shape.cells()],
            vec![excess_variance; shape.cells()],
            Availability::Independent(vec![availability; shape.cells()]),
        )
    }

    /// Unbiased annotations with no excess variance.
    pub fn perfect(shape: Shape, availability: f64) -> Result<Self> {
        Self::uniform(shape, 0.0, 0.0, availability)
    }

    /// Constant bias and excess variance with one uniformly chosen annotation per sample.
    pub fn single_uniform(shape: Shape, bias: f64, excess_variance: f64) -> Result<Self> {
        Self::new(shape, vec![bias; shape.cells()], vec![excess_variance; shape.cells()], Availability::SingleUniform)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn bias(&self, s: ContextId, a: ActionId) -> f64 {
        self.bias[self.shape.idx(s, a)]
    }
    pub fn excess_variance(&self, s: ContextId, a: ActionId) -> f64 {
        self.excess_variance[self.shape.idx(s, a)]
    }
    pub fn availability(&self) -> &Availability {
        &self.availability
    }

    /// Marginal probability that counterfactual `(s, ã)` is annotated.
    pub fn availability_prob(&self, s: ContextId, a: ActionId) -> f64 {
        match &self.availability {
            Availability::Independent(p) => p[self.shape.idx(s, a)],
            Availability::SingleUniform => {
                if self.shape.n_actions > 1 {
                    1.0 / (self.shape.n_actions - 1) as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether bias and excess variance vanish everywhere.
    pub fn is_perfect(&self) -> bool {
        self.bias.iter().all(|&b| b == 0.0) && self.excess_variance.iter().all(|&d| d == 0.0)
    }

    /// Distribution over availability masks for a sample with factual action
    /// `a` in context `s`. Masks are bitsets over actions; the factual bit is
    /// never set.
    fn mask_distribution(&self, s: ContextId, a: ActionId) -> Vec<(u64, f64)> {
        let na = self.shape.n_actions;
        let others: Vec<ActionId> = (0..na).filter(|&x| x != a).collect();
        match &self.availability {
            Availability::SingleUniform => {
                let p = 1.0 / others.len() as f64;
                if others.is_empty() {
                    vec![(0, 1.0)]
                } else {
                    others.iter().map(|&x| (1u64 << x, p)).collect()
                }
            }
            Availability::Independent(table) => {
                let probs: Vec<f64> = others.iter().map(|&x| table[self.shape.idx(s, x)]).collect();
                let mut out = vec![(0u64, 1.0)];
                for (&x, &p) in others.iter().zip(&probs) {
                    let mut next = Vec::with_capacity(out.len() * 2);
                    for &(mask, q) in &out {
                        if p < 1.0 {
                            next.push((mask, q * (1.0 - p)));
                        }
                        if p > 0.0 {
                            next.push((mask | (1u64 << x), q * p));
                        }
                    }
                    out = next;
                }
                out
            }
        }
    }
}

/// Annotations attached to one logged sample, keyed by counterfactual action.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    values: Vec<(ActionId, f64)>,
}

impl AnnotationSet {
    pub fn new(mut values: Vec<(ActionId, f64)>) -> Self {
        values.sort_by_key(|&(a, _)| a);
        Self { values }
    }
    pub fn get(&self, a: ActionId) -> Option<f64> {
        self.values.iter().find(|&&(x, _)| x == a).map(|&(_, g)| g)
    }
    pub fn iter(&self) -> impl Iterator<Item = (ActionId, f64)> + '_ {
        self.values.iter().copied()
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    fn mask(&self) -> u64 {
        self.values.iter().fold(0, |m, &(a, _)| m | (1u64 << a))
    }
}

/// Logged sample with its annotations and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub factual: FactualSample,
    pub annotations: AnnotationSet,
    pub weights: Vec<f64>,
}

impl AugmentedSample {
    /// `c_i^a`: the reward for the factual action, the annotation otherwise.
    pub fn combined(&self, a: ActionId) -> Option<f64> {
        if a == self.factual.action {
            Some(self.factual.reward)
        } else {
            self.annotations.get(a)
        }
    }
}

/// Dataset augmented with counterfactual annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub samples: Vec<AugmentedSample>,
    pub shape: Shape,
}

impl AugmentedDataset {
    /// Wrap a factual dataset with no annotations and all weight on the factual action.
    pub fn from_factual(dataset: &Dataset, shape: Shape) -> Self {
        let samples = dataset
            .samples
            .iter()
            .map(|&f| AugmentedSample { factual: f, annotations: AnnotationSet::default(), weights: one_hot(shape.n_actions, f.action) })
            .collect();
        Self { samples, shape }
    }

    pub fn n_factual(&self) -> usize {
        self.samples.len()
    }

    /// Total number of annotations `M`.
    pub fn m_annotations(&self) -> usize {
        self.samples.iter().map(|x| x.annotations.len()).sum()
    }

    /// Per-pair annotation counts `M_{s,a}`.
    pub fn annotation_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.shape.cells()];
        for x in &self.samples {
            for (a, _) in x.annotations.iter() {
                c[self.shape.idx(x.factual.context, a)] += 1;
            }
        }
        c
    }

    /// Per-pair factual counts `N_{s,a}`.
    pub fn factual_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.shape.cells()];
        for x in &self.samples {
            c[self.shape.idx(x.factual.context, x.factual.action)] += 1;
        }
        c
    }

    pub fn factual(&self) -> Dataset {
        Dataset { samples: self.samples.iter().map(|x| x.factual).collect(), source_seed: 0 }
    }
}

fn one_hot(n: usize, a: ActionId) -> Vec<f64> {
    let mut w = vec![0.0; n];
    w[a] = 1.0;
    w
}

/// Draw annotations for every sample. Weights are left on the factual action.
///
/// Every counterfactual entry consumes one uniform and one normal draw whether
/// or not it ends up annotated, so two models that differ only in bias or
/// excess variance see the same availability pattern and the same noise.
pub fn annotate(dataset: &Dataset, env: &EnvSpec, model: &AnnotationModel, seed: u64) -> Result<AugmentedDataset> {
    if dataset.is_empty() {
        return Err(OpeError::Empty("cannot annotate an empty dataset".into()));
    }
    if model.shape() != env.shape() {
        return Err(OpeError::Shape("annotation model does not match the environment".into()));
    }
    let shape = env.shape();
    let na = shape.n_actions;
    let mut rng = rng_from_seed(seed);
    let draw = |s: ContextId, a: ActionId, z: f64| {
        let sd = (env.std(s, a).powi(2) + model.excess_variance(s, a)).sqrt();
        env.mean(s, a) + model.bias(s, a) + sd * z
    };
    let samples = dataset
        .samples
        .iter()
        .map(|&f| {
            let s = f.context;
            let mut values = Vec::new();
            match model.availability() {
                Availability::Independent(p) => {
                    for a in (0..na).filter(|&a| a != f.action) {
                        let u: f64 = rng.random();
                        let z: f64 = rng.sample(StandardNormal);
                        if u < p[shape.idx(s, a)] {
                            values.push((a, draw(s, a, z)));
                        }
                    }
                }
                Availability::SingleUniform => {
                    if na > 1 {
                        let k = rng.random_range(0..na - 1);
                        let a = if k >= f.action { k + 1 } else { k };
                        let z: f64 = rng.sample(StandardNormal);
                        values.push((a, draw(s, a, z)));
                    }
                }
            }
            AugmentedSample { factual: f, annotations: AnnotationSet::new(values), weights: one_hot(na, f.action) }
        })
        .collect();
    Ok(AugmentedDataset { samples, shape })
}

/// How realized weights are formed from the availability pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    /// Equal weight over the factual action and the annotated actions.
    EqualWithMissingMassToFactual,
    /// A fixed table `W(ã | s, a)`; weight of missing annotations moves to the factual action.
    CustomTable,
}

/// Availability mask distribution, and weight row with the factual action, as bit patterns.
type MomentKey = (Vec<u64>, Vec<u64>);
/// Mean weights and weight covariances for one `(context, factual action)`.
type Moments = (Vec<f64>, Vec<f64>);

/// Weighting rule together with its first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    kind: WeightKind,
    shape: Shape,
    /// `[s][factual][target]`, used by the custom kind.
    table: Vec<f64>,
    /// `W̄(target | s, factual)`, same layout as `table`.
    mean: Vec<f64>,
    /// `Cov(w^j, w^k)` laid out `[s][factual][j][k]`.
    cov: Vec<f64>,
}

impl WeightScheme {
    #[inline]
    fn widx(&self, s: ContextId, a: ActionId, t: ActionId) -> usize {
        (s * self.shape.n_actions + a) * self.shape.n_actions + t
    }

    #[inline]
    fn cidx(&self, s: ContextId, a: ActionId, j: ActionId, k: ActionId) -> usize {
        ((s * self.shape.n_actions + a) * self.shape.n_actions + j) * self.shape.n_actions + k
    }

    /// Equal weights over available entries, moments exact over the availability law.
    pub fn equal(model: &AnnotationModel) -> Self {
        let shape = model.shape();
        Self::enumerated(WeightKind::EqualWithMissingMassToFactual, model, vec![0.0; shape.cells() * shape.n_actions])
    }

    /// Fixed weight table `W(ã | s, a)` laid out `[s][a][ã]`, moments exact over the availability law.
    pub fn custom(model: &AnnotationModel, table: Vec<f64>) -> Result<Self> {
        let shape = model.shape();
        let na = shape.n_actions;
        if table.len() != shape.cells() * na {
            return Err(OpeError::Shape("weight table must be laid out [context][factual][target]".into()));
        }
        for (row_idx, row) in table.chunks(na).enumerate() {
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (ksum(row.iter().copied()) - 1.0).abs() > WEIGHT_TOL {
                return Err(OpeError::WeightSumViolation { sample: row_idx, sum: ksum(row.iter().copied()) });
            }
        }
        Ok(Self::enumerated(WeightKind::CustomTable, model, table))
    }

    /// Scheme with explicitly supplied mean weights and covariances.
    ///
    /// Realized weights follow the custom rule with `mean` as the table.
    pub fn from_moments(shape: Shape, mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let na = shape.n_actions;
        if mean.len() != shape.cells() * na || cov.len() != shape.cells() * na * na {
            return Err(OpeError::Shape("moment tables have the wrong size".into()));
        }
        for (row_idx, row) in mean.chunks(na).enumerate() {
            let sum = ksum(row.iter().copied());
            if (sum - 1.0).abs() > WEIGHT_TOL || row.iter().any(|w| *w < 0.0) {
                return Err(OpeError::WeightSumViolation { sample: row_idx, sum });
            }
        }
        Ok(Self { kind: WeightKind::CustomTable, shape, table: mean.clone(), mean, cov })
    }

    /// All weight on the factual action: `W̄` is the identity.
    pub fn factual_only(shape: Shape) -> Self {
        let na = shape.n_actions;
        let mut mean = vec![0.0; shape.cells() * na];
        for s in 0..shape.n_contexts {
            for a in 0..na {
                mean[(s * na + a) * na + a] = 1.0;
            }
        }
        Self { kind: WeightKind::CustomTable, shape, table: mean.clone(), mean, cov: vec![0.0; shape.cells() * na * na] }
    }

    fn enumerated(kind: WeightKind, model: &AnnotationModel, table: Vec<f64>) -> Self {
        let shape = model.shape();
        let na = shape.n_actions;
        let mut scheme = Self {
            kind,
            shape,
            table,
            mean: vec![0.0; shape.cells() * na],
            cov: vec![0.0; shape.cells() * na * na],
        };
        // Contexts often share availability rows and tables; reuse their moments.
        let mut cache: HashMap<MomentKey, Moments> = HashMap::new();
        for s in 0..shape.n_contexts {
            for a in 0..na {
                let masks = model.mask_distribution(s, a);
                let row_start = scheme.widx(s, a, 0);
                let row: Vec<f64> = scheme.table[row_start..row_start + na].to_vec();
                let key = (
                    masks.iter().flat_map(|&(m, p)| [m, p.to_bits()]).collect::<Vec<u64>>(),
                    row.iter().map(|w| w.to_bits()).chain([a as u64]).collect::<Vec<u64>>(),
                );
                let (mean, cov) = cache
                    .entry(key)
                    .or_insert_with(|| {
                        let mut m = vec![0.0; na];
                        let mut second = vec![0.0; na * na];
                        let mut w = vec![0.0; na];
                        for &(mask, p) in &masks {
                            realize(kind, &row, a, mask, &mut w);
                            for j in 0..na {
                                m[j] += p * w[j];
                                for k in 0..na {
                                    second[j * na + k] += p * w[j] * w[k];
                                }
                            }
                        }
                        let cov = (0..na * na).map(|jk| second[jk] - m[jk / na] * m[jk % na]).collect();
                        (m, cov)
                    })
                    .clone();
                scheme.mean[row_start..row_start + na].copy_from_slice(&mean);
                let c0 = scheme.cidx(s, a, 0, 0);
                scheme.cov[c0..c0 + na * na].copy_from_slice(&cov);
            }
        }
        scheme
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// `W̄(target | s, factual)`.
    pub fn mean_weight(&self, s: ContextId, factual: ActionId, target: ActionId) -> f64 {
        self.mean[self.widx(s, factual, target)]
    }

    /// `Cov(w^j, w^k)` for samples with context `s` and factual action `factual`.
    pub fn weight_covariance(&self, s: ContextId, factual: ActionId, j: ActionId, k: ActionId) -> f64 {
        self.cov[self.cidx(s, factual, j, k)]
    }

    /// Realized weights for a sample.
    pub fn weights_for(&self, s: ContextId, factual: ActionId, annotations: &AnnotationSet) -> Vec<f64> {
        let na = self.shape.n_actions;
        let start = self.widx(s, factual, 0);
        let mut w = vec![0.0; na];
        realize(self.kind, &self.table[start..start + na], factual, annotations.mask(), &mut w);
        w
    }
}

fn realize(kind: WeightKind, table_row: &[f64], factual: ActionId, mask: u64, out: &mut [f64]) {
    out.iter_mut().for_each(|w| *w = 0.0);
    match kind {
        WeightKind::EqualWithMissingMassToFactual => {
            let k = mask.count_ones() as f64;
            let w = 1.0 / (1.0 + k);
            out[factual] = w;
            for (a, o) in out.iter_mut().enumerate() {
                if mask & (1u64 << a) != 0 {
                    *o = w;
                }
            }
        }
        WeightKind::CustomTable => {
            let mut missing = 0.0;
            for (a, o) in out.iter_mut().enumerate() {
                if a == factual {
                    continue;
                }
                if mask & (1u64 << a) != 0 {
                    *o = table_row[a];
                } else {
                    missing += table_row[a];
                }
            }
            out[factual] = table_row[factual] + missing;
        }
    }
}

/// Attach realized weights to every sample.
pub fn assign_weights(aug: &AugmentedDataset, scheme: &WeightScheme) -> Result<AugmentedDataset> {
    if scheme.shape() != aug.shape {
        return Err(OpeError::Shape("weight scheme does not match the dataset".into()));
    }
    let mut out = aug.clone();
    for (i, x) in out.samples.iter_mut().enumerate() {
        let w = scheme.weights_for(x.factual.context, x.factual.action, &x.annotations);
        let sum = ksum(w.iter().copied());
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(OpeError::WeightSumViolation { sample: i, sum });
        }
        x.weights = w;
    }
    Ok(out)
}

/// Effective logging policy `π_b⁺` induced by the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBehaviorPolicy {
    shape: Shape,
    probs: Vec<f64>,
}

impl AugmentedBehaviorPolicy {
    pub fn prob(&self, s: ContextId, a: ActionId) -> f64 {
        self.probs[self.shape.idx(s, a)]
    }
    pub fn row(&self, s: ContextId) -> &[f64] {
        &self.probs[s * self.shape.n_actions..(s + 1) * self.shape.n_actions]
    }
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Pairs where `pi_e` acts but `π_b⁺` has no mass.
    pub fn uncovered(&self, pi_e: &Policy) -> Vec<(ContextId, ActionId)> {
        (0..self.shape.n_contexts)
            .flat_map(|s| (0..self.shape.n_actions).map(move |a| (s, a)))
            .filter(|&(s, a)| pi_e.prob(s, a) > 0.0 && self.prob(s, a) == 0.0)
            .collect()
    }

    pub fn covers(&self, pi_e: &Policy) -> bool {
        self.uncovered(pi_e).is_empty()
    }
}

/// `π_b⁺(a|s) = W̄(a|s,a) π_b(a|s) + Σ_{ǎ≠a} W̄(a|s,ǎ) π_b(ǎ|s)`.
pub fn augmented_behavior_policy(pi_b: &Policy, scheme: &WeightScheme) -> Result<AugmentedBehaviorPolicy> {
    let shape = scheme.shape();
    if pi_b.n_contexts() != shape.n_contexts || pi_b.n_actions() != shape.n_actions {
        return Err(OpeError::Shape("behavior policy does not match the weight scheme".into()));
    }
    let na = shape.n_actions;
    let mut probs = vec![0.0; shape.cells()];
    for s in 0..shape.n_contexts {
        for a in 0..na {
            let own = scheme.mean_weight(s, a, a) * pi_b.prob(s, a);
            let others = ksum((0..na).filter(|&b| b != a).map(|b| scheme.mean_weight(s, b, a) * pi_b.prob(s, b)));
            probs[shape.idx(s, a)] = own + others;
        }
        let total = ksum(probs[s * na..(s + 1) * na].iter().copied());
        if (total - 1.0).abs() > 1e-10 {
            return Err(OpeError::InvalidDistribution { what: format!("augmented behavior row {s}"), reason: format!("sums to {total}") });
        }
    }
    Ok(AugmentedBehaviorPolicy { shape, probs })
}

/// `ρ⁺(a|s) = π_e(a|s) / π_b⁺(a|s)` with `0/0 := 0`.
pub fn augmented_ips_ratio(pi_e: &Policy, pib_plus: &AugmentedBehaviorPolicy, s: ContextId, a: ActionId) -> Result<f64> {
    ratio(pi_e.prob(s, a), pib_plus.prob(s, a), s, a)
}
