//! Experiment harness: configuration, trials, grids, Δ analysis, export and
//! the theorem agreement suite.

pub mod config;
pub mod delta;
pub mod export;
pub mod grid;
pub mod trial;
pub mod verify;

pub use config::{AvailabilityConfig, DmModeConfig, Experiment, ExperimentConfig, GroundTruth, PairSelection, Pooling, RewardModelConfig};
pub use delta::{delta_analysis, DeltaResult, DeltaRow};
pub use export::{export_delta, export_grid, Format};
pub use grid::{run_grid, GridResult, GridRow};
pub use trial::run_trial;
pub use verify::{verify_theorems, VerifyReport};
