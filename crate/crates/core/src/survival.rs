//! Weighted Nelson-Aalen and Kaplan-Meier curves and their restricted means.
//!
//! A weight vector stands in for soft subgroup membership: each patient
//! contributes `w_i` to both the event count and the risk set of its arm.
//! Tied event times form one hazard increment; an increment whose weighted
//! risk set is empty is skipped.

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};

/// Restriction time `t*` for mean survival, in months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeHorizon(f64);

impl TimeHorizon {
    pub fn new(t_star: f64) -> Result<Self> {
        if t_star.is_finite() && t_star > 0.0 {
            Ok(Self(t_star))
        } else {
            Err(Error::InvalidHorizon(t_star))
        }
    }

    /// Smaller of the two per-arm maximum observed times.
    pub fn auto(data: &Dataset) -> Self {
        let t = data
            .max_time(Arm::Control)
            .min(data.max_time(Arm::Experimental));
        Self(t)
    }

    pub fn t_star(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimeHorizon {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TimeHorizon> for f64 {
    fn from(h: TimeHorizon) -> f64 {
        h.0
    }
}

/// Right-continuous step function: 1 before the first jump, then
/// `survival_values[k]` on `[jump_times[k], jump_times[k + 1])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepSurvivalCurve {
    pub jump_times: Vec<f64>,
    pub survival_values: Vec<f64>,
}

impl StepSurvivalCurve {
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.survival_values[k - 1]
        }
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }
}

/// Per-arm weighted risk-set table over the distinct event times that have a
/// nonempty weighted risk set.
#[derive(Debug, Clone)]
pub(crate) struct HazardTable {
    pub times: Vec<f64>,
    pub events: Vec<f64>,
    pub at_risk: Vec<f64>,
    /// `(patient, count of table times <= patient time, patient is an event)`
    pub members: Vec<(usize, usize, bool)>,
}

impl HazardTable {
    /// Builds the table for `arm`, reading weights through `weight(i)`.
    pub fn build(data: &Dataset, arm: Arm, weight: impl Fn(usize) -> f64) -> Self {
        let obs = data.observations();
        let order = data.arm_order(arm);

        // group equal times: (time, total weight, event weight, has event)
        let mut groups: Vec<(f64, f64, f64, bool)> = Vec::new();
        let mut group_of = Vec::with_capacity(order.len());
        for &i in order {
            let o = &obs[i];
            let w = weight(i);
            match groups.last_mut() {
                Some(g) if g.0 == o.time_months => {
                    g.1 += w;
                    if o.event {
                        g.2 += w;
                        g.3 = true;
                    }
                }
                _ => groups.push((o.time_months, w, if o.event { w } else { 0.0 }, o.event)),
            }
            group_of.push(groups.len() - 1);
        }

        let mut risk = vec![0.0; groups.len()];
        let mut acc = 0.0;
        for (g, r) in groups.iter().zip(risk.iter_mut()).rev() {
            acc += g.1;
            *r = acc;
        }

        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut at_risk = Vec::new();
        // number of table entries at or before each group
        let mut count_through = Vec::with_capacity(groups.len());
        for (g, &r) in groups.iter().zip(&risk) {
            if g.3 && r > 0.0 {
                times.push(g.0);
                events.push(g.2);
                at_risk.push(r);
            }
            count_through.push(times.len());
        }

        let members = order
            .iter()
            .zip(&group_of)
            .map(|(&i, &g)| {
                let c = count_through[g];
                let own = obs[i].event && c > 0 && times[c - 1] == obs[i].time_months;
                (i, c, own)
            })
            .collect();

        Self {
            times,
            events,
            at_risk,
            members,
        }
    }

    pub fn increments(&self) -> Vec<f64> {
        self.events
            .iter()
            .zip(&self.at_risk)
            .map(|(e, r)| e / r)
            .collect()
    }

    /// `exp(-H)` after each table time.
    pub fn survival_after(&self) -> Vec<f64> {
        let mut h = 0.0;
        self.increments()
            .into_iter()
            .map(|d| {
                h += d;
                (-h).exp()
            })
            .collect()
    }

    pub fn nelson_aalen(&self) -> StepSurvivalCurve {
        let mut curve = StepSurvivalCurve::default();
        let mut h = 0.0;
        for (k, d) in self.increments().into_iter().enumerate() {
            if d > 0.0 {
                h += d;
                curve.jump_times.push(self.times[k]);
                curve.survival_values.push((-h).exp());
            }
        }
        curve
    }

    pub fn kaplan_meier(&self) -> StepSurvivalCurve {
        let mut curve = StepSurvivalCurve::default();
        let mut s = 1.0;
        for k in 0..self.times.len() {
            if self.events[k] > 0.0 {
                s *= 1.0 - self.events[k] / self.at_risk[k];
                curve.jump_times.push(self.times[k]);
                curve.survival_values.push(s.max(0.0));
            }
        }
        curve
    }
}

/// Integral of a step curve with values `after[k]` from `times[k]` onward.
///
/// Returns the area over `[0, t*]` and, for every k, the tail area
/// `sum_{j >= k} after[j] * len_j` that a change in the k-th cumulative-hazard
/// term would scale.
pub(crate) fn restricted_area(times: &[f64], after: &[f64], t_star: f64) -> (f64, Vec<f64>) {
    let k_max = times.len();
    let mut tails = vec![0.0; k_max];
    let mut acc = 0.0;
    for k in (0..k_max).rev() {
        if times[k] < t_star {
            let end = if k + 1 < k_max {
                times[k + 1].min(t_star)
            } else {
                t_star
            };
            acc += after[k] * (end - times[k]);
        }
        tails[k] = acc;
    }
    let head = times.first().map_or(t_star, |&t| t.min(t_star));
    (head + acc, tails)
}

fn check_weights(data: &Dataset, weights: &[f64], arm: Arm) -> Result<()> {
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            got: weights.len(),
            expected: data.len(),
        });
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(0.0..=1.0).contains(*w))
    {
        return Err(Error::WeightOutOfRange { index, value });
    }
    if data.arm_count(arm) == 0 {
        return Err(Error::ArmAbsent(arm.code()));
    }
    Ok(())
}

/// Weighted Nelson-Aalen survival `exp(-H)` for one arm.
pub fn weighted_survival_curve(data: &Dataset, weights: &[f64], arm: Arm) -> Result<StepSurvivalCurve> {
    check_weights(data, weights, arm)?;
    Ok(HazardTable::build(data, arm, |i| weights[i]).nelson_aalen())
}

/// Weighted Kaplan-Meier product-limit curve for one arm.
pub fn km_curve(data: &Dataset, weights: &[f64], arm: Arm) -> Result<StepSurvivalCurve> {
    check_weights(data, weights, arm)?;
    Ok(HazardTable::build(data, arm, |i| weights[i]).kaplan_meier())
}

/// Restricted mean survival: the exact area under `curve` on `[0, t*]`,
/// holding the last value beyond the final jump.
pub fn rmst(curve: &StepSurvivalCurve, horizon: TimeHorizon) -> f64 {
    restricted_area(&curve.jump_times, &curve.survival_values, horizon.t_star()).0
}
