//! The nine policy-value estimators.
//!
//! All estimators are plain averages over logged samples. No clipping or
//! self-normalization is applied. Importance ratios are evaluated only where
//! they are used, so a dataset whose logged actions all have positive behavior
//! probability is always evaluable; the problem-level coverage flag is left to
//! the caller.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{augmented_ips_ratio, AugmentedBehaviorPolicy, AugmentedDataset};
use crate::bandit::{ips_ratio, ContextId, Dataset, EnvSpec, EvaluationProblem, Policy};
use crate::error::{OpeError, Result};
use crate::reward_model::RewardModel;
use crate::rng::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorId {
    IS,
    DM,
    DMplus,
    ISplus,
    #[serde(rename = "DM_IS")]
    DmIs,
    #[serde(rename = "DMplus_IS")]
    DmPlusIs,
    #[serde(rename = "DM_ISplus")]
    DmIsPlus,
    #[serde(rename = "DMplus_ISplus")]
    DmPlusIsPlus,
    NaiveDR,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 9] = [
        EstimatorId::IS,
        EstimatorId::DM,
        EstimatorId::DMplus,
        EstimatorId::ISplus,
        EstimatorId::DmIs,
        EstimatorId::DmPlusIs,
        EstimatorId::DmIsPlus,
        EstimatorId::DmPlusIsPlus,
        EstimatorId::NaiveDR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::IS => "IS",
            EstimatorId::DM => "DM",
            EstimatorId::DMplus => "DMplus",
            EstimatorId::ISplus => "ISplus",
            EstimatorId::DmIs => "DM_IS",
            EstimatorId::DmPlusIs => "DMplus_IS",
            EstimatorId::DmIsPlus => "DM_ISplus",
            EstimatorId::DmPlusIsPlus => "DMplus_ISplus",
            EstimatorId::NaiveDR => "NaiveDR",
        }
    }

    /// Needs a reward model fitted on factual data only.
    pub fn uses_factual_model(self) -> bool {
        matches!(self, EstimatorId::DM | EstimatorId::DmIs | EstimatorId::DmIsPlus)
    }

    /// Needs a reward model fitted on the augmented data.
    pub fn uses_augmented_model(self) -> bool {
        matches!(self, EstimatorId::DMplus | EstimatorId::DmPlusIs | EstimatorId::DmPlusIsPlus | EstimatorId::NaiveDR)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = OpeError;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| OpeError::Parse(format!("unknown estimator `{s}`")))
    }
}

/// A point estimate with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Number of logged samples averaged over.
    pub n_used: usize,
    /// Largest importance ratio that entered the estimate.
    pub max_ratio: f64,
}

/// How the direct method averages over contexts.
#[derive(Debug, Clone, Copy)]
pub enum DmMode<'a> {
    /// `Σ_s d0(s) Σ_a π_e(a|s) R̂(s,a)`.
    ExactD0,
    /// Average of `Σ_a π_e(a|s_i) R̂(s_i,a)` over the given contexts.
    SampleContexts(&'a Dataset),
}

struct Acc {
    sum: KahanSum,
    n: usize,
    max_ratio: f64,
}

impl Acc {
    fn new() -> Self {
        Self { sum: KahanSum::new(), n: 0, max_ratio: 0.0 }
    }
    fn push(&mut self, v: f64) {
        self.sum.add(v);
        self.n += 1;
    }
    fn ratio(&mut self, r: f64) -> f64 {
        self.max_ratio = self.max_ratio.max(r.abs());
        r
    }
    fn finish(self, denom: usize) -> Estimate {
        Estimate { value: self.sum.total() / denom as f64, n_used: self.n, max_ratio: self.max_ratio }
    }
}

fn nonempty(n: usize) -> Result<()> {
    if n == 0 {
        Err(OpeError::Empty("estimator needs at least one sample".into()))
    } else {
        Ok(())
    }
}

/// Doubly robust per-sample term `R̂(s,π_e) + ρ (c − R̂(s,a))`.
#[inline]
fn dr_term(model: &RewardModel, pi_e: &Policy, s: ContextId, a: usize, c: f64, rho: f64) -> f64 {
    model.predict_policy(s, pi_e) + rho * (c - model.predict(s, a))
}

/// `(1/N) Σ ρ(a_i|s_i) r_i`.
pub fn estimate_is(d: &Dataset, problem: &EvaluationProblem) -> Result<Estimate> {
    nonempty(d.len())?;
    let mut acc = Acc::new();
    for x in &d.samples {
        let rho = acc.ratio(ips_ratio(problem, x.context, x.action)?);
        acc.push(rho * x.reward);
    }
    Ok(acc.finish(d.len()))
}

/// Direct method with the given reward model.
pub fn estimate_dm(model: &RewardModel, env: &EnvSpec, pi_e: &Policy, mode: DmMode<'_>) -> Result<Estimate> {
    match mode {
        DmMode::ExactD0 => {
            let mut acc = Acc::new();
            for (s, &p) in env.d0().iter().enumerate() {
                if p > 0.0 {
                    acc.push(p * model.predict_policy(s, pi_e));
                }
            }
            let value = acc.sum.total();
            Ok(Estimate { value, n_used: model.report().factual_counts.iter().sum(), max_ratio: 0.0 })
        }
        DmMode::SampleContexts(d) => {
            nonempty(d.len())?;
            let mut acc = Acc::new();
            for x in &d.samples {
                acc.push(model.predict_policy(x.context, pi_e));
            }
            Ok(acc.finish(d.len()))
        }
    }
}

/// Direct method with the augmented reward model.
pub fn estimate_dm_plus(model_plus: &RewardModel, env: &EnvSpec, pi_e: &Policy, mode: DmMode<'_>) -> Result<Estimate> {
    estimate_dm(model_plus, env, pi_e, mode)
}

/// `(1/N) Σ_i Σ_a w_i^a ρ⁺(a|s_i) c_i^a`.
pub fn estimate_is_plus(d_plus: &AugmentedDataset, pi_e: &Policy, pib_plus: &AugmentedBehaviorPolicy) -> Result<Estimate> {
    nonempty(d_plus.n_factual())?;
    let mut acc = Acc::new();
    for x in &d_plus.samples {
        let s = x.factual.context;
        let mut inner = KahanSum::new();
        for (a, &w) in x.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = x.combined(a).ok_or_else(|| OpeError::Config(format!("positive weight on unannotated action {a}")))?;
            let rho = acc.ratio(augmented_ips_ratio(pi_e, pib_plus, s, a)?);
            inner.add(w * rho * c);
        }
        acc.push(inner.total());
    }
    Ok(acc.finish(d_plus.n_factual()))
}

/// `(1/N) Σ [R̂(s_i,π_e) + ρ(a_i|s_i)(r_i − R̂(s_i,a_i))]`.
pub fn estimate_dr(d: &Dataset, model: &RewardModel, problem: &EvaluationProblem) -> Result<Estimate> {
    nonempty(d.len())?;
    let mut acc = Acc::new();
    for x in &d.samples {
        let rho = acc.ratio(ips_ratio(problem, x.context, x.action)?);
        acc.push(dr_term(model, &problem.pi_e, x.context, x.action, x.reward, rho));
    }
    Ok(acc.finish(d.len()))
}

/// Doubly robust estimate with the augmented reward model and standard ratios.
pub fn estimate_dm_plus_is(d: &Dataset, model_plus: &RewardModel, problem: &EvaluationProblem) -> Result<Estimate> {
    estimate_dr(d, model_plus, problem)
}

/// `(1/N) Σ_i [R̂(s_i,π_e) + Σ_a w_i^a ρ⁺(a|s_i)(c_i^a − R̂(s_i,a))]`.
pub fn estimate_dm_is_plus(d_plus: &AugmentedDataset, model: &RewardModel, pi_e: &Policy, pib_plus: &AugmentedBehaviorPolicy) -> Result<Estimate> {
    nonempty(d_plus.n_factual())?;
    let mut acc = Acc::new();
    for x in &d_plus.samples {
        let s = x.factual.context;
        let base = model.predict_policy(s, pi_e);
        let single = x.weights[x.factual.action] == 1.0;
        if single {
            // Only the factual entry carries weight: the term is the DR term.
            let rho = acc.ratio(augmented_ips_ratio(pi_e, pib_plus, s, x.factual.action)?);
            acc.push(dr_term(model, pi_e, s, x.factual.action, x.factual.reward, rho));
            continue;
        }
        let mut inner = KahanSum::new();
        for (a, &w) in x.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = x.combined(a).ok_or_else(|| OpeError::Config(format!("positive weight on unannotated action {a}")))?;
            let rho = acc.ratio(augmented_ips_ratio(pi_e, pib_plus, s, a)?);
            inner.add(w * rho * (c - model.predict(s, a)));
        }
        acc.push(base + inner.total());
    }
    Ok(acc.finish(d_plus.n_factual()))
}

/// DM-IS⁺ with the augmented reward model.
pub fn estimate_dm_plus_is_plus(d_plus: &AugmentedDataset, model_plus: &RewardModel, pi_e: &Policy, pib_plus: &AugmentedBehaviorPolicy) -> Result<Estimate> {
    estimate_dm_is_plus(d_plus, model_plus, pi_e, pib_plus)
}

/// Standard doubly robust estimate over the `N + M` flattened rows of the
/// augmented dataset, each annotation treated as a logged sample.
pub fn estimate_naive_dr(d_plus: &AugmentedDataset, model_plus: &RewardModel, problem: &EvaluationProblem) -> Result<Estimate> {
    nonempty(d_plus.n_factual())?;
    let mut acc = Acc::new();
    for x in &d_plus.samples {
        let s = x.factual.context;
        let rho = acc.ratio(ips_ratio(problem, s, x.factual.action)?);
        acc.push(dr_term(model_plus, &problem.pi_e, s, x.factual.action, x.factual.reward, rho));
        for (a, g) in x.annotations.iter() {
            let rho = acc.ratio(ips_ratio(problem, s, a)?);
            acc.push(dr_term(model_plus, &problem.pi_e, s, a, g, rho));
        }
    }
    let rows = acc.n;
    let mut est = acc.finish(rows);
    est.n_used = d_plus.n_factual();
    Ok(est)
}

/// Everything an estimator may need for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInputs<'a> {
    pub problem: &'a EvaluationProblem,
    pub dataset: &'a Dataset,
    pub augmented: &'a AugmentedDataset,
    pub pib_plus: &'a AugmentedBehaviorPolicy,
    pub model: Option<&'a RewardModel>,
    pub model_plus: Option<&'a RewardModel>,
    /// Use the evaluation contexts for DM instead of the exact `d0` sum.
    pub dm_sample_mode: bool,
}

/// Evaluate one estimator by id.
pub fn evaluate<'a>(id: EstimatorId, inputs: &EstimatorInputs<'a>) -> Result<Estimate> {
    let need = |m: Option<&'a RewardModel>| m.ok_or_else(|| OpeError::Config(format!("{id} needs a fitted reward model")));
    let p = inputs.problem;
    let mode = if inputs.dm_sample_mode { DmMode::SampleContexts(inputs.dataset) } else { DmMode::ExactD0 };
    match id {
        EstimatorId::IS => estimate_is(inputs.dataset, p),
        EstimatorId::DM => estimate_dm(need(inputs.model)?, &p.env, &p.pi_e, mode),
        EstimatorId::DMplus => estimate_dm_plus(need(inputs.model_plus)?, &p.env, &p.pi_e, mode),
        EstimatorId::ISplus => estimate_is_plus(inputs.augmented, &p.pi_e, inputs.pib_plus),
        EstimatorId::DmIs => estimate_dr(inputs.dataset, need(inputs.model)?, p),
        EstimatorId::DmPlusIs => estimate_dm_plus_is(inputs.dataset, need(inputs.model_plus)?, p),
        EstimatorId::DmIsPlus => estimate_dm_is_plus(inputs.augmented, need(inputs.model)?, &p.pi_e, inputs.pib_plus),
        EstimatorId::DmPlusIsPlus => estimate_dm_plus_is_plus(inputs.augmented, need(inputs.model_plus)?, &p.pi_e, inputs.pib_plus),
        EstimatorId::NaiveDR => estimate_naive_dr(inputs.augmented, need(inputs.model_plus)?, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{annotate, assign_weights, augmented_behavior_policy, AnnotationModel, WeightScheme};
    use crate::bandit::{sample_dataset, FactualSample, Shape};
    use crate::reward_model::{fit_tabular_mean, rows_from_augmented, rows_from_dataset};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn env() -> Arc<EnvSpec> {
        Arc::new(EnvSpec::new("toy", Shape::new(2, 2), vec![0.5, 0.5], vec![1.0, 2.0, 0.0, 0.0], vec![1.0; 4]).unwrap())
    }

    fn problem(pb: &[f64], pe: &[f64]) -> EvaluationProblem {
        EvaluationProblem::new(env(), Policy::context_free(2, pb).unwrap(), Policy::context_free(2, pe).unwrap()).unwrap()
    }

    struct Fixture {
        p: EvaluationProblem,
        d: Dataset,
        aug: AugmentedDataset,
        plus: AugmentedBehaviorPolicy,
        model: RewardModel,
        model_plus: RewardModel,
    }

    fn fixture(pb: &[f64], pe: &[f64], availability: f64, seed: u64) -> Fixture {
        let p = problem(pb, pe);
        let d = sample_dataset(&p, 60, seed).unwrap();
        let am = AnnotationModel::perfect(p.env.shape(), availability).unwrap();
        let scheme = WeightScheme::equal(&am);
        let aug = assign_weights(&annotate(&d, &p.env, &am, seed + 1).unwrap(), &scheme).unwrap();
        let plus = augmented_behavior_policy(&p.pi_b, &scheme).unwrap();
        let fit = sample_dataset(&p, 60, seed + 2).unwrap();
        let model = fit_tabular_mean(&rows_from_dataset(&fit), p.env.shape()).unwrap();
        let fit_aug = assign_weights(&annotate(&fit, &p.env, &am, seed + 3).unwrap(), &scheme).unwrap();
        let model_plus = fit_tabular_mean(&rows_from_augmented(&fit_aug), p.env.shape()).unwrap();
        Fixture { p, d, aug, plus, model, model_plus }
    }

    fn mean_reward(d: &Dataset) -> f64 {
        crate::rng::kmean(&d.samples.iter().map(|x| x.reward).collect::<Vec<_>>())
    }

    #[test]
    fn names_round_trip() {
        for id in EstimatorId::ALL {
            assert_eq!(id.name().parse::<EstimatorId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.name()));
        }
        assert!("XX".parse::<EstimatorId>().is_err());
    }

    #[test]
    fn is_examples() {
        let f = fixture(&[0.5, 0.5], &[0.5, 0.5], 0.0, 1);
        let e = estimate_is(&f.d, &f.p).unwrap();
        assert!((e.value - mean_reward(&f.d)).abs() < 1e-14);
        assert_eq!(e.n_used, 60);
        let p = problem(&[0.5, 0.5], &[0.9, 0.1]);
        let single = Dataset::new(vec![FactualSample { context: 0, action: 0, reward: 1.0 }], 0).unwrap();
        assert!((estimate_is(&single, &p).unwrap().value - 1.8).abs() < 1e-15);
        let zeros = Dataset::new(vec![FactualSample { context: 1, action: 1, reward: 0.0 }; 5], 0).unwrap();
        assert_eq!(estimate_is(&zeros, &p).unwrap().value, 0.0);
    }

    #[test]
    fn dm_examples() {
        let f = fixture(&[0.5, 0.5], &[0.9, 0.1], 1.0, 2);
        let c = RewardModel::constant(f.p.env.shape(), 2.5);
        assert_eq!(estimate_dm(&c, &f.p.env, &f.p.pi_e, DmMode::ExactD0).unwrap().value, 2.5);
        assert_eq!(estimate_dm(&c, &f.p.env, &f.p.pi_e, DmMode::SampleContexts(&f.d)).unwrap().value, 2.5);
        let truth = RewardModel::truth(&f.p.env);
        let exact = crate::bandit::policy_value_exact(&f.p.env, &f.p.pi_e);
        assert!((estimate_dm(&truth, &f.p.env, &f.p.pi_e, DmMode::ExactD0).unwrap().value - exact).abs() < 1e-15);
        let same_ctx = Dataset::new(vec![FactualSample { context: 0, action: 1, reward: 0.0 }; 3], 0).unwrap();
        let v = estimate_dm_plus(&f.model_plus, &f.p.env, &f.p.pi_e, DmMode::SampleContexts(&same_ctx)).unwrap().value;
        assert!((v - f.model_plus.predict_policy(0, &f.p.pi_e)).abs() < 1e-15);
    }

    #[test]
    fn dr_examples() {
        let f = fixture(&[0.3, 0.7], &[0.8, 0.2], 1.0, 3);
        let zero = RewardModel::constant(f.p.env.shape(), 0.0);
        assert_eq!(estimate_dr(&f.d, &zero, &f.p).unwrap().value, estimate_is(&f.d, &f.p).unwrap().value);
        assert_eq!(estimate_dm_plus_is(&f.d, &zero, &f.p).unwrap().value, estimate_is(&f.d, &f.p).unwrap().value);
        let same = problem(&[0.3, 0.7], &[0.3, 0.7]);
        let c = RewardModel::constant(same.env.shape(), -4.0);
        assert!((estimate_dr(&f.d, &c, &same).unwrap().value - mean_reward(&f.d)).abs() < 1e-13);
        // zero residuals
        let fitted = RewardModel::fixed(f.p.env.shape(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let exact_data = Dataset::new(f.d.samples.iter().map(|x| FactualSample { reward: fitted.predict(x.context, x.action), ..*x }).collect(), 0).unwrap();
        let dm_avg = crate::rng::kmean(&exact_data.samples.iter().map(|x| fitted.predict_policy(x.context, &f.p.pi_e)).collect::<Vec<_>>());
        assert!((estimate_dr(&exact_data, &fitted, &f.p).unwrap().value - dm_avg).abs() < 1e-14);
    }

    #[test]
    fn reduction_lattice_without_annotations() {
        let f = fixture(&[0.3, 0.7], &[0.8, 0.2], 0.0, 4);
        assert_eq!(f.aug.m_annotations(), 0);
        let is = estimate_is(&f.d, &f.p).unwrap().value;
        assert_eq!(estimate_is_plus(&f.aug, &f.p.pi_e, &f.plus).unwrap().value, is);
        assert_eq!(
            estimate_dm_is_plus(&f.aug, &f.model, &f.p.pi_e, &f.plus).unwrap().value,
            estimate_dr(&f.d, &f.model, &f.p).unwrap().value
        );
        assert_eq!(
            estimate_dm_plus_is_plus(&f.aug, &f.model_plus, &f.p.pi_e, &f.plus).unwrap().value,
            estimate_dm_plus_is(&f.d, &f.model_plus, &f.p).unwrap().value
        );
        assert_eq!(
            estimate_naive_dr(&f.aug, &f.model_plus, &f.p).unwrap().value,
            estimate_dr(&f.d, &f.model_plus, &f.p).unwrap().value
        );
    }

    #[test]
    fn deterministic_target_full_annotations() {
        let f = fixture(&[0.3, 0.7], &[0.0, 1.0], 1.0, 5);
        let v = estimate_is_plus(&f.aug, &f.p.pi_e, &f.plus).unwrap().value;
        let direct = crate::rng::kmean(&f.aug.samples.iter().map(|x| x.combined(1).unwrap()).collect::<Vec<_>>());
        assert!((v - direct).abs() < 1e-13);
        let zero = RewardModel::constant(f.p.env.shape(), 0.0);
        assert_eq!(estimate_dm_is_plus(&f.aug, &zero, &f.p.pi_e, &f.plus).unwrap().value, v);
        assert_eq!(estimate_dm_plus_is_plus(&f.aug, &zero, &f.p.pi_e, &f.plus).unwrap().value, v);
    }

    #[test]
    fn naive_dr_zero_residuals_average_rows() {
        let f = fixture(&[0.5, 0.5], &[0.9, 0.1], 1.0, 6);
        let fitted = RewardModel::fixed(f.p.env.shape(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut aug = f.aug.clone();
        for x in &mut aug.samples {
            let s = x.factual.context;
            x.factual.reward = fitted.predict(s, x.factual.action);
            x.annotations = crate::annotations::AnnotationSet::new(x.annotations.iter().map(|(a, _)| (a, fitted.predict(s, a))).collect());
        }
        let rows = (aug.n_factual() + aug.m_annotations()) as f64;
        let expected = aug.samples.iter().map(|x| (1 + x.annotations.len()) as f64 * fitted.predict_policy(x.factual.context, &f.p.pi_e)).sum::<f64>() / rows;
        assert!((estimate_naive_dr(&aug, &fitted, &f.p).unwrap().value - expected).abs() < 1e-14);
    }

    #[test]
    fn coverage_errors_only_for_logged_actions() {
        let p = problem(&[1.0, 0.0], &[0.5, 0.5]);
        let d = sample_dataset(&p, 20, 1).unwrap();
        assert!(!p.is_covered());
        assert!(estimate_is(&d, &p).is_ok());
        let bad = Dataset::new(vec![FactualSample { context: 0, action: 1, reward: 1.0 }], 0).unwrap();
        assert!(matches!(estimate_is(&bad, &p), Err(OpeError::CoverageViolation { .. })));
    }

    #[test]
    fn affine_shift_of_direct_methods() {
        let f = fixture(&[0.3, 0.7], &[0.8, 0.2], 1.0, 7);
        let k = 3.25;
        for m in [&f.model, &f.model_plus] {
            let base = estimate_dm(m, &f.p.env, &f.p.pi_e, DmMode::ExactD0).unwrap().value;
            let shifted = estimate_dm(&m.shifted(k), &f.p.env, &f.p.pi_e, DmMode::ExactD0).unwrap().value;
            assert!((shifted - base - k).abs() < 1e-12);
        }
        // DR family: shifting rewards and R̂ together
        let d_shift = Dataset::new(f.d.samples.iter().map(|x| FactualSample { reward: x.reward + k, ..*x }).collect(), 0).unwrap();
        let base = estimate_dr(&f.d, &f.model, &f.p).unwrap().value;
        let shifted = estimate_dr(&d_shift, &f.model.shifted(k), &f.p).unwrap().value;
        assert!((shifted - base - k).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn equal_weights_full_annotations_collapse(seed in 0u64..500, pb in 0.05f64..0.95, pe in 0.0f64..1.0) {
            let f = fixture(&[pb, 1.0 - pb], &[pe, 1.0 - pe], 1.0, seed);
            let is_plus = estimate_is_plus(&f.aug, &f.p.pi_e, &f.plus).unwrap().value;
            let dm_is_plus = estimate_dm_is_plus(&f.aug, &f.model, &f.p.pi_e, &f.plus).unwrap().value;
            let dmp_is_plus = estimate_dm_plus_is_plus(&f.aug, &f.model_plus, &f.p.pi_e, &f.plus).unwrap().value;
            prop_assert!((is_plus - dm_is_plus).abs() <= 1e-10);
            prop_assert!((is_plus - dmp_is_plus).abs() <= 1e-10);
        }

        #[test]
        fn estimators_are_pure(seed in 0u64..100) {
            let f = fixture(&[0.4, 0.6], &[0.7, 0.3], 0.5, seed);
            let inputs = EstimatorInputs { problem: &f.p, dataset: &f.d, augmented: &f.aug, pib_plus: &f.plus, model: Some(&f.model), model_plus: Some(&f.model_plus), dm_sample_mode: false };
            for id in EstimatorId::ALL {
                let a = evaluate(id, &inputs).unwrap();
                let b = evaluate(id, &inputs).unwrap();
                prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
                prop_assert!(a.value.is_finite());
            }
        }
    }
}
