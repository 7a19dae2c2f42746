//! Replicability-aware data selection for domain adaptation.
//!
//! Six per-epoch selection strategies drive a weighted-SGD softmax
//! classifier; the crate measures how much each strategy's selection
//! distribution moves under one-example changes, evaluates the resulting
//! replicability bounds, and runs multi-seed studies that count how often
//! independently trained models disagree by more than a threshold.

pub mod bounds;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod report;
pub mod sensitivity;
pub mod stats;
pub mod strategies;

pub use bounds::{
    estimate_c, replicability_bound, replicability_expression, required_sample_size, stability_bound,
    strategy_bound, strategy_expression, BoundInputs, StabilityConstants,
};
pub use data::{
    generate_synthetic, load_csv, read_csv, replace_example, save_csv, write_csv, CsvSchema, Dataset, DomainPair,
    Example, SynthConfig, SynthTask,
};
pub use error::{Error, Result};
pub use harness::{
    histogram, pairwise_failure_rate, run_study, sweep, weight_dynamics, DataSource, Protocol, ReplicationStudy,
    RunRecord, StudyConfig, SweepReport,
};
pub use model::{
    bounded_loss, init_params, per_example_gradient, predict_proba, train, two_stage_train, Hyper, ModelParams,
    TrainTrace, TrainedModel,
};
pub use sensitivity::{empirical_sensitivity, theoretical_sensitivity, tv_distance, SensitivityEstimate};
pub use strategies::{pacing, EpochContext, Pace, SelectionWeights, StrategyConfig};
