//! Trial observations and the dataset container shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Randomized treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Experimental,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Experimental];

    pub fn from_code(code: u8) -> Option<Arm> {
        match code {
            0 => Some(Arm::Control),
            1 => Some(Arm::Experimental),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }

    pub(crate) fn index(self) -> usize {
        self.code() as usize
    }
}

/// One patient's follow-up: observed time in months, event flag and arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalObservation {
    pub time_months: f64,
    pub event: bool,
    pub arm: Arm,
}

impl SurvivalObservation {
    pub fn new(time_months: f64, event: bool, arm: Arm) -> Self {
        Self {
            time_months,
            event,
            arm,
        }
    }
}

/// Dense row-major covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl Covariates {
    pub fn from_row_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                what: "covariate values",
                got: values.len(),
                expected: n_rows * n_cols,
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    what: "covariate row",
                    got: row.len(),
                    expected: n_cols,
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Covariates {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Covariates {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
        }
    }
}

/// Observations, covariates and (for simulated data) true subgroup labels.
///
/// Construction validates the invariants: positive finite times, matching row
/// counts, and both arms present. Per-arm time orderings are cached because
/// every curve evaluation needs them.
#[derive(Debug, Clone)]
pub struct Dataset {
    observations: Vec<SurvivalObservation>,
    covariates: Covariates,
    feature_names: Vec<String>,
    true_membership: Option<Vec<bool>>,
    arm_order: [Vec<usize>; 2],
}

impl Dataset {
    pub fn new(
        observations: Vec<SurvivalObservation>,
        covariates: Covariates,
        feature_names: Vec<String>,
        true_membership: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = observations.len();
        if covariates.n_rows() != n {
            return Err(Error::DimensionMismatch {
                what: "covariate rows",
                got: covariates.n_rows(),
                expected: n,
            });
        }
        if feature_names.len() != covariates.n_cols() {
            return Err(Error::DimensionMismatch {
                what: "feature names",
                got: feature_names.len(),
                expected: covariates.n_cols(),
            });
        }
        if let Some(labels) = &true_membership {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "true membership",
                    got: labels.len(),
                    expected: n,
                });
            }
        }
        for (row, obs) in observations.iter().enumerate() {
            if !(obs.time_months.is_finite() && obs.time_months > 0.0) {
                return Err(Error::InvalidObservation {
                    row,
                    reason: format!("time {} must be positive and finite", obs.time_months),
                });
            }
        }
        let arm_order = sorted_arm_order(&observations);
        for arm in Arm::BOTH {
            if arm_order[arm.index()].is_empty() {
                return Err(Error::ArmAbsent(arm.code()));
            }
        }
        Ok(Self {
            observations,
            covariates,
            feature_names,
            true_membership,
            arm_order,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[SurvivalObservation] {
        &self.observations
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.covariates.n_cols()
    }

    pub fn true_membership(&self) -> Option<&[bool]> {
        self.true_membership.as_deref()
    }

    /// Patient indices in `arm`, sorted by ascending time (ties by index).
    pub(crate) fn arm_order(&self, arm: Arm) -> &[usize] {
        &self.arm_order[arm.index()]
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.arm_order[arm.index()].len()
    }

    /// Largest observed time within `arm`.
    pub fn max_time(&self, arm: Arm) -> f64 {
        let order = self.arm_order(arm);
        self.observations[order[order.len() - 1]].time_months
    }

    pub fn event_fraction(&self) -> f64 {
        let events = self.observations.iter().filter(|o| o.event).count();
        events as f64 / self.len() as f64
    }

    /// Rows `indices`, in that order. Fails if the subset loses an arm.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let observations = indices.iter().map(|&i| self.observations[i]).collect();
        let true_membership = self
            .true_membership
            .as_ref()
            .map(|labels| indices.iter().map(|&i| labels[i]).collect());
        Dataset::new(
            observations,
            self.covariates.select_rows(indices),
            self.feature_names.clone(),
            true_membership,
        )
    }

    /// Reassigns covariate rows: patient `i` receives the covariates (and
    /// truth label) of patient `perm[i]`, outcomes and arms stay in place.
    pub fn with_permuted_covariates(&self, perm: &[usize]) -> Result<Dataset> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "permutation",
                got: perm.len(),
                expected: self.len(),
            });
        }
        let true_membership = self
            .true_membership
            .as_ref()
            .map(|labels| perm.iter().map(|&i| labels[i]).collect());
        Dataset::new(
            self.observations.clone(),
            self.covariates.select_rows(perm),
            self.feature_names.clone(),
            true_membership,
        )
    }
}

fn sorted_arm_order(observations: &[SurvivalObservation]) -> [Vec<usize>; 2] {
    let mut order: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, obs) in observations.iter().enumerate() {
        order[obs.arm.index()].push(i);
    }
    for idx in &mut order {
        idx.sort_by(|&a, &b| {
            observations[a]
                .time_months
                .total_cmp(&observations[b].time_months)
                .then(a.cmp(&b))
        });
    }
    order
}
