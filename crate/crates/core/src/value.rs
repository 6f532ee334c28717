//! The subgroup-by-treatment interaction value and its logit gradient.
//!
//! With membership scores `p`, four weighted Nelson-Aalen curves are formed:
//! arm 1 and arm 0 weighted by `p` (performing subgroup) and by `1 - p`
//! (non-performing subgroup). The value is
//!
//! ```text
//! V = sum(p) * (R11 - R01) - sum(1 - p) * (R10 - R00)
//! ```
//!
//! where `Rab` is the restricted mean of the arm-`a` curve in subgroup `b`.
//! Boosting minimizes `L = -V` over the logits `F = logit(p)`.

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::par;
use crate::survival::{restricted_area, HazardTable, TimeHorizon};

/// Scores are kept inside `[SCORE_EPS, 1 - SCORE_EPS]`.
pub const SCORE_EPS: f64 = 1e-6;

/// Soft subgroup sizes below this contribute nothing to the value.
pub const MIN_SOFT_SIZE: f64 = 1e-9;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn clip(p: f64) -> f64 {
    p.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

/// Per-patient membership logits and their clipped sigmoid scores.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipState {
    logits: Vec<f64>,
    scores: Vec<f64>,
}

impl MembershipState {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let scores = logits.iter().map(|&f| clip(sigmoid(f))).collect();
        Self { logits, scores }
    }

    /// Scores given directly; they are clipped and the logits back-solved.
    pub fn from_scores(scores: &[f64]) -> Self {
        let scores: Vec<f64> = scores.iter().map(|&p| clip(p)).collect();
        let logits = scores.iter().map(|&p| (p / (1.0 - p)).ln()).collect();
        Self { logits, scores }
    }

    /// Hard memberships as exact 0/1 weights (logits of infinite magnitude).
    ///
    /// These are not clipped: with a clipped weight, a subgroup whose risk set
    /// is exhausted would keep accruing hazard from the other subgroup's
    /// residual mass, so the curves would no longer be the subgroup curves.
    pub fn from_hard(members: &[bool]) -> Self {
        let (logits, scores) = members
            .iter()
            .map(|&m| if m { (f64::INFINITY, 1.0) } else { (f64::NEG_INFINITY, 0.0) })
            .unzip();
        Self { logits, scores }
    }

    pub fn constant(n: usize, logit: f64) -> Self {
        Self::from_logits(vec![logit; n])
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// `1 - p` for every patient.
    pub fn complement(&self) -> Self {
        Self {
            logits: self.logits.iter().map(|f| -f).collect(),
            scores: self.scores.iter().map(|p| 1.0 - p).collect(),
        }
    }

    /// `dp/dF`, zero where the clip is active.
    fn score_slope(&self, i: usize) -> f64 {
        let raw = sigmoid(self.logits[i]);
        if raw > SCORE_EPS && raw < 1.0 - SCORE_EPS {
            raw * (1.0 - raw)
        } else {
            0.0
        }
    }
}

/// The value and its building blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub value: f64,
    pub rmst_arm1_perform: f64,
    pub rmst_arm0_perform: f64,
    pub rmst_arm1_nonperform: f64,
    pub rmst_arm0_nonperform: f64,
    pub soft_size_perform: f64,
    pub soft_size_nonperform: f64,
    pub horizon: TimeHorizon,
}

/// `dL/dF_i` with `L = -V`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

/// One weighted curve's table and restricted-mean pieces.
struct CurveTerm {
    table: HazardTable,
    increments: Vec<f64>,
    rmst: f64,
    tails: Vec<f64>,
}

impl CurveTerm {
    fn new(data: &Dataset, arm: Arm, t_star: f64, weight: impl Fn(usize) -> f64) -> Self {
        let table = HazardTable::build(data, arm, weight);
        let increments = table.increments();
        let (rmst, tails) = restricted_area(&table.times, &table.survival_after(), t_star);
        Self {
            table,
            increments,
            rmst,
            tails,
        }
    }

    /// Writes `dR/dw_i` for each patient of this arm into `out`.
    ///
    /// `dR/dDelta_k = -tail_k` and `dDelta_k/dw_i = (event_ik - Delta_k at_risk_ik) / D_k`.
    fn weight_derivative(&self, out: &mut [f64]) {
        let t = &self.table;
        let mut prefix = Vec::with_capacity(t.times.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for k in 0..t.times.len() {
            acc += self.tails[k] * self.increments[k] / t.at_risk[k];
            prefix.push(acc);
        }
        for &(i, count, own_event) in &t.members {
            let mut d = prefix[count];
            if own_event {
                let k = count - 1;
                d -= self.tails[k] / t.at_risk[k];
            }
            out[i] = d;
        }
    }
}

struct Terms {
    perform: [CurveTerm; 2],
    nonperform: [CurveTerm; 2],
    size_perform: f64,
    size_nonperform: f64,
}

impl Terms {
    fn new(data: &Dataset, state: &MembershipState, horizon: TimeHorizon) -> Result<Self> {
        if state.len() != data.len() {
            return Err(Error::DimensionMismatch {
                what: "membership state",
                got: state.len(),
                expected: data.len(),
            });
        }
        let t = horizon.t_star();
        let p = state.scores();
        let term = |arm, perform: bool| {
            if perform {
                CurveTerm::new(data, arm, t, |i| p[i])
            } else {
                CurveTerm::new(data, arm, t, |i| 1.0 - p[i])
            }
        };
        let size_perform: f64 = p.iter().sum();
        let size_nonperform: f64 = p.iter().map(|x| 1.0 - x).sum();
        Ok(Self {
            perform: [term(Arm::Control, true), term(Arm::Experimental, true)],
            nonperform: [term(Arm::Control, false), term(Arm::Experimental, false)],
            size_perform,
            size_nonperform,
        })
    }

    fn perform_active(&self) -> bool {
        self.size_perform >= MIN_SOFT_SIZE
    }

    fn nonperform_active(&self) -> bool {
        self.size_nonperform >= MIN_SOFT_SIZE
    }

    fn report(&self, horizon: TimeHorizon) -> ValueReport {
        let r11 = self.perform[1].rmst;
        let r01 = self.perform[0].rmst;
        let r10 = self.nonperform[1].rmst;
        let r00 = self.nonperform[0].rmst;
        let mut value = 0.0;
        if self.perform_active() {
            value += self.size_perform * (r11 - r01);
        }
        if self.nonperform_active() {
            value -= self.size_nonperform * (r10 - r00);
        }
        ValueReport {
            value,
            rmst_arm1_perform: r11,
            rmst_arm0_perform: r01,
            rmst_arm1_nonperform: r10,
            rmst_arm0_nonperform: r00,
            soft_size_perform: self.size_perform,
            soft_size_nonperform: self.size_nonperform,
            horizon,
        }
    }
}

/// Value of the membership scores in `state`.
pub fn value_hat(data: &Dataset, state: &MembershipState, horizon: TimeHorizon) -> Result<ValueReport> {
    Ok(Terms::new(data, state, horizon)?.report(horizon))
}

/// The treatment-rule value `sum(p) R11 + sum(1 - p) R00`, i.e. the mean
/// outcome when everyone receives the arm their score recommends.
pub fn value_itr_hat(data: &Dataset, state: &MembershipState, horizon: TimeHorizon) -> Result<f64> {
    let terms = Terms::new(data, state, horizon)?;
    let mut v = 0.0;
    if terms.perform_active() {
        v += terms.size_perform * terms.perform[1].rmst;
    }
    if terms.nonperform_active() {
        v += terms.size_nonperform * terms.nonperform[0].rmst;
    }
    Ok(v)
}

/// Analytic gradient of `-V` with respect to each logit.
pub fn value_gradient(
    data: &Dataset,
    state: &MembershipState,
    horizon: TimeHorizon,
) -> Result<GradientVector> {
    let terms = Terms::new(data, state, horizon)?;
    let n = data.len();

    // dR/dw for the arm each patient belongs to; other arm contributes nothing.
    let mut d_perform = vec![0.0; n];
    let mut d_nonperform = vec![0.0; n];
    for arm in [0, 1] {
        terms.perform[arm].weight_derivative(&mut d_perform);
        terms.nonperform[arm].weight_derivative(&mut d_nonperform);
    }

    let gap_perform = terms.perform[1].rmst - terms.perform[0].rmst;
    let gap_nonperform = terms.nonperform[1].rmst - terms.nonperform[0].rmst;
    let on_perform = terms.perform_active();
    let on_nonperform = terms.nonperform_active();

    let values: Vec<f64> = data
        .observations()
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let sign = match obs.arm {
                Arm::Experimental => 1.0,
                Arm::Control => -1.0,
            };
            let mut dv_dp = 0.0;
            if on_perform {
                dv_dp += gap_perform + terms.size_perform * sign * d_perform[i];
            }
            if on_nonperform {
                // weight is 1 - p, so dR/dp = -dR/dw and d(sum(1-p))/dp = -1
                dv_dp += gap_nonperform + terms.size_nonperform * sign * d_nonperform[i];
            }
            -dv_dp * state.score_slope(i)
        })
        .collect();

    if values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("value gradient"));
    }
    Ok(GradientVector { values })
}

/// Central-difference gradient of `-V`, one coordinate at a time.
pub fn finite_diff_gradient(
    data: &Dataset,
    state: &MembershipState,
    horizon: TimeHorizon,
    h: f64,
) -> Result<GradientVector> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("step {h} must be positive")));
    }
    if state.len() != data.len() {
        return Err(Error::DimensionMismatch {
            what: "membership state",
            got: state.len(),
            expected: data.len(),
        });
    }
    let loss = |i: usize, delta: f64| -> Result<f64> {
        let mut f = state.logits().to_vec();
        f[i] += delta;
        Ok(-value_hat(data, &MembershipState::from_logits(f), horizon)?.value)
    };
    let values = par::map_range(data.len(), |i| -> Result<f64> {
        Ok((loss(i, h)? - loss(i, -h)?) / (2.0 * h))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(GradientVector { values })
}
