//! One-step sepsis treatment environment.
//!
//! A context is a patient record: heart rate, blood pressure, oxygen and
//! glucose levels, a diabetic flag and three treatment flags. Two absorbing
//! contexts (death, discharge) complete the state space; they have zero
//! reward and are unreachable under the default context distribution.
//! Actions are the eight on/off combinations of antibiotics, vasopressors and
//! ventilation, and the action sets the treatment state. The mean reward is
//! `−(abnormal vitals) − 1{any treatment on}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{all_pairs_listed, Environment, EnvKind, FittingSpec, ModelFamily};
use crate::annotations::Availability;
use crate::bandit::{ActionId, ContextId, EnvSpec, FeatureMap, Observation, Shape};
use crate::error::{OpeError, Result};

pub const N_ACTIONS: usize = 8;
/// Patient contexts before the two absorbing ones.
pub const N_PATIENT_CONTEXTS: usize = 3 * 3 * 2 * 5 * 2 * 8;
pub const N_CONTEXTS: usize = N_PATIENT_CONTEXTS + 2;

const HR_LEVELS: usize = 3;
const BP_LEVELS: usize = 3;
const O2_LEVELS: usize = 2;
const GLUCOSE_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SepsisContext {
    /// 0 low, 1 normal, 2 high.
    pub heart_rate: usize,
    /// 0 low, 1 normal, 2 high.
    pub blood_pressure: usize,
    /// 0 low, 1 normal.
    pub oxygen: usize,
    /// 0 very low, 1 low, 2 normal, 3 high, 4 very high.
    pub glucose: usize,
    pub diabetic: bool,
    /// Bitset: antibiotics, vasopressors, ventilation.
    pub treatments: usize,
}

impl SepsisContext {
    pub fn abnormal_vitals(&self) -> usize {
        usize::from(self.heart_rate != 1) + usize::from(self.blood_pressure != 1) + usize::from(self.oxygen != 1) + usize::from(self.glucose != 2)
    }

    pub fn index(&self) -> ContextId {
    ((((self.heart_rate * BP_LEVELS + self.blood_pressure) * O2_LEVELS + self.oxygen) * GLUCOSE_LEVELS + self.glucose) * 2
            + usize::from(self.diabetic))
            * 8
            + self.treatments
    }

    /// Record of length 8 used as the context side table.
    pub fn record(&self) -> Vec<f64> {
        vec![
            self.heart_rate as f64,
            self.blood_pressure as f64,
            self.oxygen as f64,
            self.glucose as f64,
            f64::from(u8::from(self.diabetic)),
            (self.treatments & 1) as f64,
            ((self.treatments >> 1) & 1) as f64,
            ((self.treatments >> 2) & 1) as f64,
        ]
    }
}

/// Decode a patient context id; `None` for the absorbing contexts.
pub fn sepsis_context(s: ContextId) -> Option<SepsisContext> {
    if s >= N_PATIENT_CONTEXTS {
        return None;
    }
    let treatments = s % 8;
    let rest = s / 8;
    let diabetic = rest % 2 == 1;
    let rest = rest / 2;
    let glucose = rest % GLUCOSE_LEVELS;
    let rest = rest / GLUCOSE_LEVELS;
    let oxygen = rest % O2_LEVELS;
    let rest = rest / O2_LEVELS;
    let blood_pressure = rest % BP_LEVELS;
    let heart_rate = rest / BP_LEVELS;
    debug_assert!(heart_rate < HR_LEVELS);
    Some(SepsisContext { heart_rate, blood_pressure, oxygen, glucose, diabetic, treatments })
}

fn on_treatment(a: ActionId) -> bool {
    a != 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SepsisConfig {
    pub reward_std: f64,
    /// Coefficients on `[abnormal vitals, on treatment]`.
    pub theta: [f64; 2],
    /// Number of one-hot `(context, action)` indicators kept by the misspecified model.
    pub one_hot_width: usize,
}

impl Default for SepsisConfig {
    fn default() -> Self {
        Self { reward_std: 1.0, theta: [-1.0, -1.0], one_hot_width: 168 }
    }
}

/// `[abnormal vitals, on treatment]`; zero for absorbing contexts.
#[derive(Debug, Clone, Copy)]
pub struct SepsisFeatures;

impl FeatureMap for SepsisFeatures {
    fn dim(&self) -> usize {
        2
    }
    fn write(&self, s: ContextId, a: ActionId, out: &mut [f64]) {
        match sepsis_context(s) {
            Some(c) => {
                out[0] = c.abnormal_vitals() as f64;
                out[1] = f64::from(u8::from(on_treatment(a)));
            }
            None => out.fill(0.0),
        }
    }
    fn well_specified(&self) -> bool {
        true
    }
}

/// Indicators for a fixed subset of `(context, action)` pairs: the reachable
/// pairs whose mean reward is smallest in magnitude, ties broken by index.
#[derive(Debug, Clone)]
pub struct SepsisOneHot {
    /// Feature index of each pair, or `u32::MAX` when not kept.
    slot: Vec<u32>,
    width: usize,
}

impl SepsisOneHot {
    pub fn new(spec: &EnvSpec, width: usize) -> Self {
        let shape = spec.shape();
        let mut cells: Vec<(usize, f64)> = (0..shape.n_contexts)
            .filter(|&s| spec.d0()[s] > 0.0)
            .flat_map(|s| (0..shape.n_actions).map(move |a| shape.idx(s, a)))
            .map(|c| (c, spec.mean_table()[c].abs()))
            .collect();
        cells.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let width = width.min(cells.len());
        let mut slot = vec![u32::MAX; shape.cells()];
        for (k, &(c, _)) in cells.iter().take(width).enumerate() {
            slot[c] = k as u32;
        }
        Self { slot, width }
    }

    /// Whether pair `(s, a)` has its own indicator.
    pub fn keeps(&self, s: ContextId, a: ActionId) -> bool {
        self.slot[s * N_ACTIONS + a] != u32::MAX
    }
}

impl FeatureMap for SepsisOneHot {
    fn dim(&self) -> usize {
        self.width
    }
    fn write(&self, s: ContextId, a: ActionId, out: &mut [f64]) {
        out.fill(0.0);
        let k = self.slot[s * N_ACTIONS + a];
        if k != u32::MAX {
            out[k as usize] = 1.0;
        }
    }
    fn well_specified(&self) -> bool {
        false
    }
}

pub fn build_sepsis(cfg: &SepsisConfig) -> Result<EnvSpec> {
    if cfg.reward_std < 0.0 || cfg.one_hot_width == 0 {
        return Err(OpeError::Config("sepsis needs a nonnegative reward std and a positive one-hot width".into()));
    }
    let shape = Shape::new(N_CONTEXTS, N_ACTIONS);
    let mut d0 = vec![1.0 / N_PATIENT_CONTEXTS as f64; N_PATIENT_CONTEXTS];
    d0.extend([0.0, 0.0]);
    let mut mean = vec![0.0; shape.cells()];
    let mut buf = [0.0; 2];
    for s in 0..N_CONTEXTS {
        for a in 0..N_ACTIONS {
            SepsisFeatures.write(s, a, &mut buf);
            mean[shape.idx(s, a)] = cfg.theta[0] * buf[0] + cfg.theta[1] * buf[1];
        }
    }
    let mut table: Vec<Vec<f64>> = (0..N_PATIENT_CONTEXTS).map(|s| sepsis_context(s).expect("patient context").record()).collect();
    table.push(vec![-1.0; 8]);
    table.push(vec![-2.0; 8]);
    EnvSpec::new("sepsis", shape, d0, mean, vec![cfg.reward_std; shape.cells()])?
        .with_context_table(table)
        .map(|e| e.with_feature_map(Arc::new(SepsisFeatures)))
}

/// The target policy and the six behavior policies.
pub fn sepsis_policies() -> (Vec<f64>, Vec<(&'static str, Vec<f64>)>) {
    let target = vec![0.3, 0.2, 0.0, 0.0, 0.2, 0.1, 0.1, 0.1];
    let behaviors = vec![
        ("b1", vec![0.1, 0.1, 0.4, 0.3, 0.1, 0.0, 0.0, 0.0]),
        ("b2", vec![0.1, 0.1, 0.4, 0.2, 0.1, 0.1, 0.0, 0.0]),
        ("b3", vec![0.1, 0.1, 0.4, 0.1, 0.1, 0.1, 0.0, 0.1]),
        ("b4", vec![0.1, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1]),
        ("b5", vec![0.2, 0.1, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1]),
        ("b6", vec![0.3, 0.1, 0.2, 0.0, 0.1, 0.1, 0.1, 0.1]),
    ];
    (target, behaviors)
}

pub(super) fn environment(cfg: &SepsisConfig) -> Result<Environment> {
    let spec = build_sepsis(cfg)?;
    let one_hot = SepsisOneHot::new(&spec, cfg.one_hot_width);
    let (target, behaviors) = sepsis_policies();
    let suite = all_pairs_listed(N_CONTEXTS, &behaviors, &[("e", target)])?;
    Ok(Environment {
        kind: EnvKind::Sepsis,
        availability: Availability::Independent(vec![EnvKind::Sepsis.default_availability(); spec.shape().cells()]),
        spec: Arc::new(spec),
        well_specified: FittingSpec { family: ModelFamily::Linear(Arc::new(SepsisFeatures)), observation: Observation::Identity, well_specified: true },
        misspecified: FittingSpec { family: ModelFamily::Linear(Arc::new(one_hot)), observation: Observation::Identity, well_specified: false },
        suite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{EnvConfig, EnvKind};

    #[test]
    fn context_codec_round_trips() {
        for s in 0..N_PATIENT_CONTEXTS {
            assert_eq!(sepsis_context(s).unwrap().index(), s);
        }
        assert!(sepsis_context(N_PATIENT_CONTEXTS).is_none());
        assert_eq!(N_CONTEXTS, 1442);
    }

    #[test]
    fn reward_examples() {
        let env = build_sepsis(&SepsisConfig::default()).unwrap();
        let healthy = SepsisContext { heart_rate: 1, blood_pressure: 1, oxygen: 1, glucose: 2, diabetic: false, treatments: 0 };
        assert_eq!(env.mean(healthy.index(), 0), 0.0);
        let sick = SepsisContext { heart_rate: 0, blood_pressure: 2, oxygen: 0, glucose: 4, diabetic: true, treatments: 5 };
        assert_eq!(sick.abnormal_vitals(), 4);
        assert_eq!(env.mean(sick.index(), 3), -5.0);
        assert_eq!(env.n_actions(), 8);
        assert_eq!(env.mean(N_PATIENT_CONTEXTS, 7), 0.0);
    }

    #[test]
    fn reward_range_is_five() {
        let env = EnvConfig::default_for(EnvKind::Sepsis).build().unwrap();
        assert_eq!(env.reward_range(), 5.0);
    }

    #[test]
    fn policies_are_stochastic() {
        let (target, behaviors) = sepsis_policies();
        assert!((target.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(behaviors.len(), 6);
        for (_, b) in behaviors {
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_keeps_small_rewards() {
        let spec = build_sepsis(&SepsisConfig::default()).unwrap();
        let map = SepsisOneHot::new(&spec, 168);
        assert_eq!(map.dim(), 168);
        let kept: Vec<f64> = (0..N_CONTEXTS)
            .flat_map(|s| (0..8).map(move |a| (s, a)))
            .filter(|&(s, a)| map.keeps(s, a))
            .map(|(s, a)| spec.mean(s, a))
            .collect();
        assert_eq!(kept.len(), 168);
        assert!(kept.iter().all(|m| m.abs() <= 1.0));
        assert!(!map.keeps(N_PATIENT_CONTEXTS, 0));
    }
}
