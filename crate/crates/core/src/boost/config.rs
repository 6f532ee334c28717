use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tree-boosting hyperparameters.
///
/// Every instance carries the same constant curvature `hessian_const`, so
/// the regularized structure score reduces to first-order boosting with a
/// count-proportional denominator.
///
/// The loss is the unnormalized value (patient-months), so gradients grow
/// with n and useful step sizes are far below the usual 0.1: larger steps
/// push most scores into the clip within a few trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostConfig {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub gamma_split: f64,
    pub hessian_const: f64,
    pub min_child_weight: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            num_trees: 100,
            learning_rate: 0.0005,
            max_depth: 2,
            lambda_l2: 1.0,
            gamma_split: 0.0,
            hessian_const: 0.001,
            min_child_weight: 0.0,
            min_samples_leaf: 1,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate", "must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(Error::param("max_depth", "must be at least 1"));
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(Error::param("lambda_l2", "must be nonnegative"));
        }
        if !(self.gamma_split >= 0.0 && self.gamma_split.is_finite()) {
            return Err(Error::param("gamma_split", "must be nonnegative"));
        }
        if !(self.hessian_const > 0.0 && self.hessian_const.is_finite()) {
            return Err(Error::param("hessian_const", "must be positive"));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return Err(Error::param("min_child_weight", "must be nonnegative"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::param("min_samples_leaf", "must be at least 1"));
        }
        Ok(())
    }
}
