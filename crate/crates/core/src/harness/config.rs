//! Experiment configuration and its resolution into a runnable experiment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::annotations::{augmented_behavior_policy, AnnotationModel, AugmentedBehaviorPolicy, Availability, WeightScheme};
use crate::bandit::{policy_value_exact, policy_value_mc, EvaluationProblem};
use crate::environments::{EnvConfig, EnvKind, Environment};
use crate::error::{OpeError, Result};
use crate::estimators::EstimatorId;
use crate::rng::derive_seed;

/// Multiples of the mean reward standard deviation used for the default bias grid.
pub const DEFAULT_EPS_MULTIPLES: [f64; 9] = [-2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0];
/// Multiples of the mean reward variance used for the default excess-variance grid.
pub const DEFAULT_DELTA_MULTIPLES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
/// Nonnegative bias multiples used by the default Δ analysis.
pub const DEFAULT_DELTA_ANALYSIS_EPS_MULTIPLES: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];

/// Which annotations are available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AvailabilityConfig {
    /// Each counterfactual entry is annotated independently with probability `prob`.
    Independent { prob: f64 },
    /// Exactly one uniformly chosen counterfactual entry per sample.
    SingleUniform,
}

/// How annotated rows enter the augmented reward model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every factual and annotated row counts once.
    #[default]
    Unweighted,
    /// Rows are weighted by their annotation weights.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardModelConfig {
    pub misspecified: bool,
    pub pooling: Pooling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DmModeConfig {
    /// Sum over the known context distribution.
    #[default]
    Exact,
    /// Average over the evaluation dataset's contexts.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroundTruth {
    #[default]
    Exact,
    MonteCarlo { samples: usize },
}

/// Restrict the policy suite to some pairs, given as `"behavior/target"` ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    #[default]
    All,
    Ids(Vec<String>),
}

/// A complete experiment description. Unset optional fields take
/// environment-specific defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub pairs: PairSelection,
    /// Logged samples per dataset.
    pub n: Option<usize>,
    pub availability: Option<AvailabilityConfig>,
    pub reward_model: RewardModelConfig,
    /// Annotation bias values; defaults to multiples of the mean reward std.
    pub eps_grid: Option<Vec<f64>>,
    /// Annotation excess variances; defaults to multiples of the mean reward variance.
    pub delta_grid: Option<Vec<f64>>,
    pub estimators: Vec<EstimatorId>,
    pub trials: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub dm_mode: DmModeConfig,
    pub ground_truth: GroundTruth,
    /// Worker threads; all available cores when unset.
    pub workers: Option<usize>,
    /// Output directory.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_env(EnvKind::TwoContext)
    }
}

impl ExperimentConfig {
    pub fn for_env(kind: EnvKind) -> Self {
        Self {
            env: EnvConfig::default_for(kind),
            pairs: PairSelection::All,
            n: None,
            availability: None,
            reward_model: RewardModelConfig::default(),
            eps_grid: None,
            delta_grid: None,
            estimators: EstimatorId::ALL.to_vec(),
            trials: 100,
            bootstrap: 200,
            seed: 0,
            dm_mode: DmModeConfig::Exact,
            ground_truth: GroundTruth::Exact,
            workers: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| OpeError::Config(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| OpeError::io(path, e))?;
        Self::from_json(&text).map_err(|e| OpeError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validate and build the environment, grids and per-pair problems.
    pub fn resolve(&self) -> Result<Experiment> {
        Experiment::new(self.clone(), &DEFAULT_EPS_MULTIPLES)
    }

    /// As [`resolve`](Self::resolve), with the nonnegative default bias grid of the Δ analysis.
    pub fn resolve_for_delta(&self) -> Result<Experiment> {
        Experiment::new(self.clone(), &DEFAULT_DELTA_ANALYSIS_EPS_MULTIPLES)
    }
}

/// One policy pair ready for evaluation.
#[derive(Debug, Clone)]
pub struct PairSetup {
    pub index: usize,
    pub behavior_id: String,
    pub target_id: String,
    pub problem: EvaluationProblem,
    pub pib_plus: AugmentedBehaviorPolicy,
    /// Value of the target policy used as ground truth.
    pub truth: f64,
}

/// A validated experiment with every grid and policy pair resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub env: Environment,
    pub n: usize,
    pub availability: Availability,
    pub scheme: Arc<WeightScheme>,
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub pairs: Vec<PairSetup>,
}

impl Experiment {
    fn new(config: ExperimentConfig, eps_multiples: &[f64]) -> Result<Self> {
        let env = config.env.build()?;
        let kind = env.kind;
        let shape = env.spec.shape();
        if config.trials < 2 {
            return Err(OpeError::Config("trials must be at least 2".into()));
        }
        if config.estimators.is_empty() {
            return Err(OpeError::Config("the estimator list is empty".into()));
        }
        let n = config.n.unwrap_or_else(|| kind.default_n());
        if n == 0 {
            return Err(OpeError::Config("n must be positive".into()));
        }
        let availability = match config.availability {
            None => env.availability.clone(),
            Some(AvailabilityConfig::Independent { prob }) => {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(OpeError::Config("availability prob must lie in [0, 1]".into()));
                }
                Availability::Independent(vec![prob; shape.cells()])
            }
            Some(AvailabilityConfig::SingleUniform) => Availability::SingleUniform,
        };
        let sigma = env.spec.mean_reward_std();
        let eps_grid = config.eps_grid.clone().unwrap_or_else(|| eps_multiples.iter().map(|m| m * sigma).collect());
        let delta_grid = config.delta_grid.clone().unwrap_or_else(|| DEFAULT_DELTA_MULTIPLES.iter().map(|m| m * sigma * sigma).collect());
        if eps_grid.is_empty() || delta_grid.is_empty() {
            return Err(OpeError::Config("grids must be nonempty".into()));
        }
        if eps_grid.iter().any(|e| !e.is_finite()) || delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(OpeError::Config("bias values must be finite and excess variances nonnegative".into()));
        }
        let weight_model = AnnotationModel::new(shape, vec![0.0; shape.cells()], vec![0.0; shape.cells()], availability.clone())?;
        let scheme = Arc::new(WeightScheme::equal(&weight_model));
        let wanted: Option<Vec<&str>> = match &config.pairs {
            PairSelection::All => None,
            PairSelection::Ids(ids) => Some(ids.iter().map(String::as_str).collect()),
        };
        let mut pairs = Vec::new();
        for (index, pair) in env.suite.pairs.iter().enumerate() {
            let id = format!("{}/{}", pair.behavior_id, pair.target_id);
            if wanted.as_ref().is_some_and(|w| !w.contains(&id.as_str())) {
                continue;
            }
            let problem = EvaluationProblem::new(env.spec.clone(), pair.pi_b.clone(), pair.pi_e.clone())?;
            let pib_plus = augmented_behavior_policy(&pair.pi_b, &scheme)?;
            let truth = match config.ground_truth {
                GroundTruth::Exact => policy_value_exact(&env.spec, &pair.pi_e),
                GroundTruth::MonteCarlo { samples } => {
                    policy_value_mc(&env.spec, &pair.pi_e, samples, derive_seed(config.seed, "truth", &[index as u64]))?
                }
            };
            pairs.push(PairSetup {
                index,
                behavior_id: pair.behavior_id.clone(),
                target_id: pair.target_id.clone(),
                problem,
                pib_plus,
                truth,
            });
        }
        if pairs.is_empty() {
            return Err(OpeError::Config("no policy pair matches the selection".into()));
        }
        Ok(Self { config, env, n, availability, scheme, eps_grid, delta_grid, pairs })
    }

    /// Annotation model for one grid cell.
    pub fn annotation_model(&self, eps: f64, delta: f64) -> Result<AnnotationModel> {
        let cells = self.env.spec.shape().cells();
        AnnotationModel::new(self.env.spec.shape(), vec![eps; cells], vec![delta; cells], self.availability.clone())
    }

    /// Every `(eps, delta)` cell, bias varying slowest.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.eps_grid.iter().flat_map(|&e| self.delta_grid.iter().map(move |&d| (e, d))).collect()
    }

    /// Run `f` on a thread pool with the configured worker count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.config.workers {
            None => Ok(f()),
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w.max(1))
                    .build()
                    .map_err(|e| OpeError::Config(format!("cannot start {w} workers: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}
