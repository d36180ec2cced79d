//! Closed-form expectations and variances of the estimators on enumerable
//! environments, and a Monte-Carlo moment estimator to check them against.
//!
//! Variance reports give `N · V[V̂]` for an estimator averaging over `N`
//! samples.

use rayon::prelude::*;

use crate::annotations::{augmented_behavior_policy, AnnotationModel, AugmentedBehaviorPolicy, WeightScheme};
use crate::bandit::{context_value, ContextId, EvaluationProblem};
use crate::error::{OpeError, Result};
use crate::reward_model::RewardModel;
use crate::rng::{derive_seed, kmean, ksum, KahanSum};
use crate::stats::{bootstrap_se, population_variance, sample_variance};

/// One named term of a variance decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormReport {
    /// Sample size the report was evaluated at, when the scaled variance depends on it.
    pub n: Option<usize>,
    pub terms: Vec<Term>,
    /// `N · V[V̂]`, the sum of the terms.
    pub total: f64,
}

impl ClosedFormReport {
    fn new(n: Option<usize>, terms: Vec<Term>) -> Self {
        let total = ksum(terms.iter().map(|t| t.value));
        Self { n, terms, total }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Variance of the estimate from `n` samples.
    pub fn variance(&self, n: usize) -> f64 {
        self.total / n as f64
    }
}

/// Bias and spread of a randomly fitted reward model, per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModelErrorProfile {
    /// `E[R̂(s,a)] − R̄(s,a)`.
    pub mean_error: Vec<f64>,
    /// `Σ_a π_e(a|s) · mean_error(s,a)`.
    pub policy_mean_error: Vec<f64>,
    /// `V[R̂(s,a)]`.
    pub fit_variance: Vec<f64>,
}

impl RewardModelErrorProfile {
    fn build(problem: &EvaluationProblem, mean_error: Vec<f64>, fit_variance: Vec<f64>) -> Self {
        let shape = problem.env.shape();
        let policy_mean_error = (0..shape.n_contexts)
            .map(|s| ksum((0..shape.n_actions).map(|a| problem.pi_e.prob(s, a) * mean_error[shape.idx(s, a)])))
            .collect();
        Self { mean_error, policy_mean_error, fit_variance }
    }

    /// Profile of a fixed model: its errors are deterministic.
    pub fn frozen(problem: &EvaluationProblem, model: &RewardModel) -> Self {
        let mean = problem.env.mean_table();
        let err = model.predictions().iter().zip(mean).map(|(p, m)| p - m).collect();
        Self::build(problem, err, vec![0.0; mean.len()])
    }

    /// Profile from independently fitted models.
    pub fn from_models(problem: &EvaluationProblem, models: &[RewardModel]) -> Result<Self> {
        if models.len() < 2 {
            return Err(OpeError::Empty("an error profile needs at least two fitted models".into()));
        }
        let mean = problem.env.mean_table();
        let mut err = Vec::with_capacity(mean.len());
        let mut var = Vec::with_capacity(mean.len());
        let mut column = vec![0.0; models.len()];
        for (c, m) in mean.iter().enumerate() {
            for (slot, model) in column.iter_mut().zip(models) {
                *slot = model.predictions()[c];
            }
            err.push(kmean(&column) - m);
            var.push(sample_variance(&column));
        }
        Ok(Self::build(problem, err, var))
    }

    /// Profile measured by refitting `draws` times; `fit` receives a child seed.
    pub fn measure<F>(problem: &EvaluationProblem, draws: usize, seed: u64, fit: F) -> Result<Self>
    where
        F: Fn(u64) -> Result<RewardModel> + Sync,
    {
        let models: Vec<RewardModel> =
            (0..draws).into_par_iter().map(|k| fit(derive_seed(seed, "profile", &[k as u64]))).collect::<Result<_>>()?;
        Self::from_models(problem, &models)
    }
}

fn check_coverage(problem: &EvaluationProblem) -> Result<()> {
    match problem.uncovered().first() {
        Some(&(context, action)) => Err(OpeError::CoverageViolation { context, action, target: problem.pi_e.prob(context, action) }),
        None => Ok(()),
    }
}

fn check_augmented_coverage(problem: &EvaluationProblem, pib_plus: &AugmentedBehaviorPolicy) -> Result<()> {
    match pib_plus.uncovered(&problem.pi_e).first() {
        Some(&(context, action)) => Err(OpeError::CoverageViolation { context, action, target: problem.pi_e.prob(context, action) }),
        None => Ok(()),
    }
}

/// `V_{s∼d0}[v^{π_e}(s)]`.
fn context_variance(problem: &EvaluationProblem) -> f64 {
    let env = &problem.env;
    let v: Vec<f64> = (0..env.n_contexts()).map(|s| context_value(env, &problem.pi_e, s)).collect();
    let mean = ksum(env.d0().iter().zip(&v).map(|(p, x)| p * x));
    ksum(env.d0().iter().zip(&v).map(|(p, x)| p * (x - mean) * (x - mean)))
}

/// `Σ_s d0(s) f(s)` over contexts with positive probability.
fn over_contexts(problem: &EvaluationProblem, f: impl Fn(ContextId) -> f64) -> f64 {
    ksum(problem.env.d0().iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(s, p)| p * f(s)))
}

/// `V_{a∼π_b}[ρ(a) g(a)]` in context `s`.
fn action_variance(problem: &EvaluationProblem, s: ContextId, g: impl Fn(usize) -> f64) -> f64 {
    let (mut second, mut first) = (KahanSum::new(), KahanSum::new());
    for a in 0..problem.env.n_actions() {
        let (b, e) = (problem.pi_b.prob(s, a), problem.pi_e.prob(s, a));
        if b > 0.0 {
            let x = e / b * g(a);
            second.add(b * x * x);
            first.add(b * x);
        }
    }
    second.total() - first.total() * first.total()
}

/// `E_{a∼π_b}[ρ(a)² h(a)]` in context `s`.
fn rho_squared(problem: &EvaluationProblem, s: ContextId, h: impl Fn(usize) -> f64) -> f64 {
    ksum((0..problem.env.n_actions()).filter(|&a| problem.pi_b.prob(s, a) > 0.0).map(|a| {
        let (b, e) = (problem.pi_b.prob(s, a), problem.pi_e.prob(s, a));
        e * e / b * h(a)
    }))
}

/// `N · V[V̂^IS]`: context, action and reward-noise terms.
pub fn is_variance(problem: &EvaluationProblem) -> Result<ClosedFormReport> {
    check_coverage(problem)?;
    let env = &problem.env;
    Ok(ClosedFormReport::new(
        None,
        vec![
            Term { name: "context", value: context_variance(problem) },
            Term { name: "action", value: over_contexts(problem, |s| action_variance(problem, s, |a| env.mean(s, a))) },
            Term { name: "reward_noise", value: over_contexts(problem, |s| rho_squared(problem, s, |a| env.std(s, a).powi(2))) },
        ],
    ))
}

/// `N · V[V̂^DR]` with a fixed reward model.
pub fn dr_variance(problem: &EvaluationProblem, model: &RewardModel) -> Result<ClosedFormReport> {
    check_coverage(problem)?;
    let env = &problem.env;
    Ok(ClosedFormReport::new(
        None,
        vec![
            Term { name: "context", value: context_variance(problem) },
            Term {
                name: "action",
                value: over_contexts(problem, |s| action_variance(problem, s, |a| env.mean(s, a) - model.predict(s, a))),
            },
            Term { name: "reward_noise", value: over_contexts(problem, |s| rho_squared(problem, s, |a| env.std(s, a).powi(2))) },
        ],
    ))
}

/// `E[1/K | K > 0]` for `K ∼ Binomial(n, p)`.
pub fn inverse_count_expectation(n: usize, p: f64) -> f64 {
    if n == 0 || p <= 0.0 {
        return f64::NAN;
    }
    if p >= 1.0 {
        return 1.0 / n as f64;
    }
    let log_odds = (p / (1.0 - p)).ln();
    let mut log_pmf = n as f64 * (-p).ln_1p();
    let p0 = log_pmf.exp();
    let mut acc = KahanSum::new();
    for k in 1..=n {
        log_pmf += ((n - k + 1) as f64 / k as f64).ln() + log_odds;
        acc.add(log_pmf.exp() / k as f64);
    }
    acc.total() / (1.0 - p0)
}

/// Variance of the direct method with a tabular-mean model fitted on an
/// independent dataset of `n_fit` samples.
///
/// With `n_eval = Some(m)` the estimate averages over `m` sampled contexts and
/// the report is `m · V`; with `None` it sums over `d0` exactly and the report
/// is `n_fit · V`. Cell counts are treated marginally, each
/// conditioned on being positive.
pub fn dm_variance(problem: &EvaluationProblem, n_fit: usize, n_eval: Option<usize>) -> Result<ClosedFormReport> {
    let env = &problem.env;
    let shape = env.shape();
    let mut per_context = vec![0.0; shape.n_contexts];
    for (s, slot) in per_context.iter_mut().enumerate() {
        let d = env.d0()[s];
        if d == 0.0 {
            continue;
        }
        let mut acc = KahanSum::new();
        for a in 0..shape.n_actions {
            let e = problem.pi_e.prob(s, a);
            if e == 0.0 {
                continue;
            }
            let p = d * problem.pi_b.prob(s, a);
            if p == 0.0 {
                return Err(OpeError::RealizabilityViolation { context: s, action: a });
            }
            acc.add(e * e * env.std(s, a).powi(2) * inverse_count_expectation(n_fit, p));
        }
        *slot = acc.total();
    }
    let noise_within = ksum(env.d0().iter().zip(&per_context).map(|(d, u)| d * u));
    let noise_shared = ksum(env.d0().iter().zip(&per_context).map(|(d, u)| d * d * u));
    let report = match n_eval {
        Some(m) => ClosedFormReport::new(
            Some(m),
            vec![
                Term { name: "context", value: context_variance(problem) },
                Term { name: "fit_noise", value: noise_within },
                Term { name: "fit_noise_shared", value: (m as f64 - 1.0) * noise_shared },
            ],
        ),
        None => ClosedFormReport::new(Some(n_fit), vec![Term { name: "fit_noise", value: n_fit as f64 * noise_shared }]),
    };
    Ok(report)
}

/// Bias of DM-IS⁺ (and DM⁺-IS⁺) under annotation bias:
/// `E_{s∼d0, a∼π_e}[(1 − W̄(a|s,a) π_b(a|s) / π_b⁺(a|s)) · bias(s,a)]`.
pub fn dm_is_plus_bias(problem: &EvaluationProblem, scheme: &WeightScheme, annotations: &AnnotationModel) -> Result<f64> {
    let pib_plus = augmented_behavior_policy(&problem.pi_b, scheme)?;
    check_augmented_coverage(problem, &pib_plus)?;
    let n_actions = problem.env.n_actions();
    Ok(over_contexts(problem, |s| {
        ksum((0..n_actions).filter(|&a| problem.pi_e.prob(s, a) > 0.0).map(|a| {
            let keep = scheme.mean_weight(s, a, a) * problem.pi_b.prob(s, a) / pib_plus.prob(s, a);
            problem.pi_e.prob(s, a) * (1.0 - keep) * annotations.bias(s, a)
        }))
    }))
}

/// `N · V[V̂^{DM⁺-IS}]` when the augmented model is fitted independently of
/// the evaluation data, from its error profile.
pub fn dm_plus_is_variance(problem: &EvaluationProblem, profile: &RewardModelErrorProfile) -> Result<ClosedFormReport> {
    check_coverage(problem)?;
    let env = &problem.env;
    let shape = env.shape();
    let err = |s, a| profile.mean_error[shape.idx(s, a)];
    let fit_var = |s, a| profile.fit_variance[shape.idx(s, a)];
    let fit_term = over_contexts(problem, |s| {
        ksum((0..shape.n_actions).filter(|&a| problem.pi_b.prob(s, a) > 0.0).map(|a| {
            let (b, e) = (problem.pi_b.prob(s, a), problem.pi_e.prob(s, a));
            e * e * (1.0 / b - 1.0) * fit_var(s, a)
        }))
    });
    Ok(ClosedFormReport::new(
        None,
        vec![
            Term { name: "context", value: context_variance(problem) },
            Term { name: "reward_noise", value: over_contexts(problem, |s| rho_squared(problem, s, |a| env.std(s, a).powi(2))) },
            Term { name: "model_bias", value: over_contexts(problem, |s| action_variance(problem, s, |a| err(s, a))) },
            Term { name: "model_variance", value: fit_term },
        ],
    ))
}

/// `N · V[V̂^{DM-IS⁺}]` under perfect annotations with a fixed reward model.
pub fn dm_is_plus_variance_perfect(problem: &EvaluationProblem, scheme: &WeightScheme, model: &RewardModel) -> Result<ClosedFormReport> {
    let pib_plus = augmented_behavior_policy(&problem.pi_b, scheme)?;
    check_augmented_coverage(problem, &pib_plus)?;
    let env = &problem.env;
    let n_actions = env.n_actions();
    let rho = |s: ContextId, a: usize| {
        let b = pib_plus.prob(s, a);
        if b > 0.0 {
            problem.pi_e.prob(s, a) / b
        } else {
            0.0
        }
    };
    let resid = |s: ContextId, a: usize| env.mean(s, a) - model.predict(s, a);
    let var_r = |s: ContextId, a: usize| env.std(s, a).powi(2);

    let per_factual = |s: ContextId, f: &dyn Fn(usize) -> f64| {
        ksum((0..n_actions).filter(|&i| problem.pi_b.prob(s, i) > 0.0).map(|i| problem.pi_b.prob(s, i) * f(i)))
    };
    let action = over_contexts(problem, |s| {
        let cond = |i: usize| ksum((0..n_actions).map(|a| rho(s, a) * scheme.mean_weight(s, i, a) * resid(s, a)));
        let first = per_factual(s, &cond);
        per_factual(s, &|i| cond(i).powi(2)) - first * first
    });
    let noise = over_contexts(problem, |s| {
        per_factual(s, &|i| ksum((0..n_actions).map(|a| (scheme.mean_weight(s, i, a) * rho(s, a)).powi(2) * var_r(s, a))))
    });
    let weight_var = over_contexts(problem, |s| {
        per_factual(s, &|i| {
            ksum((0..n_actions).map(|a| rho(s, a).powi(2) * scheme.weight_covariance(s, i, a, a) * (var_r(s, a) + resid(s, a).powi(2))))
        })
    });
    let weight_cov = over_contexts(problem, |s| {
        per_factual(s, &|i| {
            ksum((0..n_actions).flat_map(|j| (0..n_actions).filter(move |&k| k != j).map(move |k| (j, k))).map(|(j, k)| {
                rho(s, j) * rho(s, k) * scheme.weight_covariance(s, i, j, k) * resid(s, j) * resid(s, k)
            }))
        })
    });
    Ok(ClosedFormReport::new(
        None,
        vec![
            Term { name: "context", value: context_variance(problem) },
            Term { name: "action", value: action },
            Term { name: "reward_noise", value: noise },
            Term { name: "weight_variance", value: weight_var },
            Term { name: "weight_covariance", value: weight_cov },
        ],
    ))
}

/// `N · V[V̂^{IS⁺}]` under perfect annotations.
pub fn is_plus_variance(problem: &EvaluationProblem, scheme: &WeightScheme) -> Result<ClosedFormReport> {
    dm_is_plus_variance_perfect(problem, scheme, &RewardModel::constant(problem.env.shape(), 0.0))
}

/// Mean and variance of a statistic over independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMoments {
    pub trials: usize,
    pub mean: f64,
    /// Unbiased variance over trials.
    pub variance: f64,
    /// Bootstrap standard errors of the mean and of the variance.
    pub se_mean: f64,
    pub se_variance: f64,
}

impl EmpiricalMoments {
    pub fn from_values(values: &[f64], resamples: usize, seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(OpeError::Empty("empirical moments need at least two trials".into()));
        }
        let mean = |x: &[f64]| kmean(x);
        let var = |x: &[f64]| sample_variance(x);
        let se = bootstrap_se(values, resamples, seed, &[&mean, &var]);
        Ok(Self { trials: values.len(), mean: kmean(values), variance: sample_variance(values), se_mean: se[0], se_variance: se[1] })
    }

    /// Variance of the trial mean.
    pub fn variance_of_mean(&self) -> f64 {
        self.variance / self.trials as f64
    }
}

/// Run `trial` on `trials` child seeds in parallel and summarize the results.
/// The output depends only on `seed`, not on scheduling.
pub fn empirical_moments<F>(trials: usize, seed: u64, resamples: usize, trial: F) -> Result<EmpiricalMoments>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let values = trial_values(trials, seed, trial)?;
    EmpiricalMoments::from_values(&values, resamples, derive_seed(seed, "bootstrap", &[]))
}

/// Values of `trial` on `trials` child seeds, in trial order.
pub fn trial_values<F>(trials: usize, seed: u64, trial: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    (0..trials).into_par_iter().map(|t| trial(derive_seed(seed, "trial", &[t as u64]))).collect()
}

/// `N · V` from a set of trial estimates, each averaging over `n` samples.
pub fn scaled_variance(values: &[f64], n: usize) -> f64 {
    n as f64 * population_variance(values)
}
