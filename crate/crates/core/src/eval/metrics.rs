use serde::{Deserialize, Serialize};

use crate::boost::{classify, predict_scores, BoostedModel};
use crate::data::Dataset;
use crate::error::Result;
use crate::survival::TimeHorizon;
use crate::value::{value_hat, MembershipState};

/// Which memberships enter the validation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    /// Classified subgroups (exact 0/1 weights).
    #[default]
    Hard,
    /// The model's soft scores.
    Soft,
}

/// Validation summary for one fitted model.
///
/// `value_hat` is reported per patient (`V / n`), the scale on which values
/// are comparable across validation-set sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub value_hat: f64,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub s1_rank: Option<f64>,
    pub s2_rank: Option<f64>,
}

/// Confusion-matrix rates of `predicted` against `truth`.
pub fn classification_rates(predicted: &[bool], truth: &[bool]) -> (f64, Option<f64>, Option<f64>) {
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        if t {
            pos += 1;
            tp += usize::from(p);
        } else {
            neg += 1;
            tn += usize::from(!p);
        }
    }
    let n = predicted.len().max(1) as f64;
    let rate = |hit: usize, total: usize| (total > 0).then(|| hit as f64 / total as f64);
    ((tp + tn) as f64 / n, rate(tp, pos), rate(tn, neg))
}

/// Scores `model` on `validation` using hard memberships at `cutoff`.
pub fn evaluate(
    model: &BoostedModel,
    validation: &Dataset,
    cutoff: f64,
    horizon: TimeHorizon,
) -> Result<Metrics> {
    evaluate_with(model, validation, cutoff, horizon, ValueMode::Hard)
}

pub fn evaluate_with(
    model: &BoostedModel,
    validation: &Dataset,
    cutoff: f64,
    horizon: TimeHorizon,
    mode: ValueMode,
) -> Result<Metrics> {
    let scores = predict_scores(model, validation.covariates())?;
    let members = classify(&scores, cutoff)?;
    let state = match mode {
        ValueMode::Hard => MembershipState::from_hard(&members),
        ValueMode::Soft => scores,
    };
    metrics_for(validation, &state, &members, horizon)
}

/// Metrics for given memberships, without a model.
pub fn metrics_for(
    data: &Dataset,
    state: &MembershipState,
    members: &[bool],
    horizon: TimeHorizon,
) -> Result<Metrics> {
    let value = value_hat(data, state, horizon)?.value / data.len() as f64;
    let mut m = Metrics {
        value_hat: value,
        ..Default::default()
    };
    if let Some(truth) = data.true_membership() {
        let (acc, sens, spec) = classification_rates(members, truth);
        m.accuracy = Some(acc);
        m.sensitivity = sens;
        m.specificity = spec;
    }
    Ok(m)
}
