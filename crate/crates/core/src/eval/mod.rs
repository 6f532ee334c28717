//! Validation metrics, tuning, Monte Carlo benchmarking and permutation tests.

mod bench;
mod cv;
mod metrics;
mod permutation;

pub use bench::{
    benchmark, replicate_seed, BenchmarkReport, BenchmarkRequest, CellReport, MetricSummary,
    ReplicateResult, METRIC_NAMES,
};
pub use cv::{cross_validate, fold_assignment, CvGrid, CvOutcome, CvScore};
pub use metrics::{classification_rates, evaluate, evaluate_with, metrics_for, Metrics, ValueMode};
pub use permutation::{maximized_value, permutation_test, PermutationResult};
