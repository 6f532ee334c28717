//! Subgroup identification for two-arm survival trials.
//!
//! Patients get a soft membership score for the subgroup in which the
//! experimental arm outperforms control. Scores are the sigmoid of an additive
//! tree model whose trees are fitted, one at a time, to the gradient of a
//! population-level value: the prevalence-weighted difference of restricted
//! mean survival gaps between the two subgroups.

pub mod boost;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod par;
mod seeding;
pub mod simgen;
pub mod survival;
pub mod value;

pub use boost::{
    boost_fit, classify, fit_tree, predict_scores, variable_importance, BoostConfig, BoostedModel,
    Tree, VariableImportance,
};
pub use data::{Arm, Covariates, Dataset, SurvivalObservation};
pub use error::{Error, ErrorKind, Result};
pub use eval::{
    benchmark, cross_validate, evaluate, permutation_test, BenchmarkReport, BenchmarkRequest, CvGrid,
    Metrics, PermutationResult,
};
pub use seeding::derive_seed;
pub use simgen::{sample_covariates, simulate, true_membership, SimConfig};
pub use survival::{km_curve, rmst, weighted_survival_curve, StepSurvivalCurve, TimeHorizon};
pub use value::{
    finite_diff_gradient, value_gradient, value_hat, value_itr_hat, GradientVector,
    MembershipState, ValueReport,
};
