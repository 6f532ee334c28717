//! Permutation test for a covariate-dependent treatment effect.
//!
//! The statistic is the in-sample hard-membership value after fitting. Null
//! draws permute covariate rows against the `(time, event, arm)` tuples, which
//! keeps the outcome and arm structure (including any overall treatment
//! effect) and breaks only the covariate link.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::boost::{boost_fit, classify, predict_scores, BoostConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::seeding::rng_for;
use crate::survival::TimeHorizon;
use crate::value::{value_hat, MembershipState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed_value: f64,
    pub null_values: Vec<f64>,
    /// `(1 + #{null >= observed}) / (B + 1)`
    pub p_value: f64,
    pub alpha: f64,
    /// Empirical `1 - alpha` quantile of the null draws.
    pub null_quantile: f64,
    /// The observed value exceeds `null_quantile`.
    pub reject: bool,
}

/// Fits `config` and returns the in-sample hard-membership value.
pub fn maximized_value(
    data: &Dataset,
    config: &BoostConfig,
    horizon: TimeHorizon,
    cutoff: f64,
) -> Result<f64> {
    let model = boost_fit(data, config, horizon)?;
    let members = classify(&predict_scores(&model, data.covariates())?, cutoff)?;
    Ok(value_hat(data, &MembershipState::from_hard(&members), horizon)?.value)
}

/// Smallest null value whose empirical CDF reaches `level`.
fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

pub fn permutation_test(
    data: &Dataset,
    config: &BoostConfig,
    horizon: TimeHorizon,
    permutations: usize,
    alpha: f64,
    seed: u64,
    cutoff: f64,
) -> Result<PermutationResult> {
    if permutations < 1 {
        return Err(Error::param("permutations", "B must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    config.validate()?;
    let observed = maximized_value(data, config, horizon, cutoff)?;
    let null_values = par::map_range(permutations, |b| -> Result<f64> {
        let mut perm: Vec<usize> = (0..data.len()).collect();
        perm.shuffle(&mut rng_for(seed, &[b as u64]));
        let shuffled = data.with_permuted_covariates(&perm)?;
        maximized_value(&shuffled, config, horizon, cutoff)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(observed, null_values, alpha))
}

fn summarize(observed: f64, null_values: Vec<f64>, alpha: f64) -> PermutationResult {
    let exceed = null_values.iter().filter(|&&v| v >= observed).count();
    let p_value = (1 + exceed) as f64 / (null_values.len() + 1) as f64;
    let null_quantile = empirical_quantile(&null_values, 1.0 - alpha);
    PermutationResult {
        observed_value: observed,
        p_value,
        alpha,
        null_quantile,
        reject: observed > null_quantile,
        null_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_draw_below_observed() {
        let r = summarize(5.0, vec![1.0], 0.1);
        assert_eq!(r.p_value, 0.5);
        assert!(r.reject);
    }

    #[test]
    fn p_value_bounds() {
        let r = summarize(0.0, vec![1.0, 2.0, 3.0], 0.1);
        assert_eq!(r.p_value, 1.0);
        let r = summarize(9.0, vec![1.0, 2.0, 3.0], 0.1);
        assert_eq!(r.p_value, 0.25);
    }

    #[test]
    fn quantile_is_inverse_ecdf() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9), 9.0);
        assert_eq!(empirical_quantile(&v, 0.95), 10.0);
    }
}
