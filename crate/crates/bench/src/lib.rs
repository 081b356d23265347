//! Synthetic covariate-shift domains, detection-style metrics and the
//! repeated-experiment protocol used to compare the adaptation methods.

pub mod domain;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use domain::{generate_domain_pair, DomainPair, DomainSpec, Family, Shift};
pub use experiment::{run_experiment, stratified_subsample, ExperimentConfig, Method};
pub use metrics::{evaluate, metrics_from_scores, MetricsReport, FPR_TARGETS};
pub use report::{ColumnResult, ExperimentReport};
