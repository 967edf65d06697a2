//! Stabilized truncated stochastic gradient descent for sparse linear classifiers.
//!
//! The trainer runs several SGD paths over permutations of the data, truncates
//! weights after each burst in proportion to how often a feature was actually
//! updated, and permanently drops features whose survival frequency falls below
//! a threshold. Baselines (plain SGD, truncated gradient, RDA, FOBOS), stability
//! metrics and a benchmark harness are included.

pub mod baselines;
pub mod bench;
pub mod burst;
pub mod config;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod schedule;
pub mod stability;
pub mod synth;
pub mod trainer;

pub use baselines::{run_baseline, BaselineConfig, BaselineKind};
pub use data::{Dataset, Label, Sample, SparseVector};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use stability::{ProbUnit, StableSet};
pub use trainer::{train, TrainConfig, TrainResult};
