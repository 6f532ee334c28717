//! First-order gradient tree boosting of the membership logits.

mod config;
mod model;
mod tree;

pub use config::BoostConfig;
pub use model::{
    boost_fit, classify, predict_scores, variable_importance, BoostedModel, Booster,
    VariableImportance,
};
pub use tree::{fit_tree, Node, Tree};
