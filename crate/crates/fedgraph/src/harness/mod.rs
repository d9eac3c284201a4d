//! Experiment harness: evaluation metrics, run configuration, the method
//! roster, experiment runners, and deterministic result writers.

pub mod config;
pub mod methods;
pub mod metrics;
pub mod report;
pub mod runners;

pub use config::{AblationFlags, ExperimentConfig};
pub use methods::{
    prepare, run_method, smallest_client, train_full_gat, Method, MethodOutcome,
    PreparedExperiment, TrainedModel,
};
pub use metrics::{compute_metrics, mann_whitney_auc, MetricsReport};
pub use runners::{
    node_feature_names, permutation_importance, run_ablation, run_comparison, run_importance,
    run_privacy_sweep, run_scalability, run_training, ScalePoint, SweepPoint, ABLATION_VARIANTS,
};
