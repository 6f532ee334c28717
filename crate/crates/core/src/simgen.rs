//! Seeded two-arm trial simulator with lognormal survival times.
//!
//! Each patient draws from its own ChaCha8 stream (`stream = patient index`),
//! so generation can be sharded across threads without changing a byte of
//! output. Per patient the draw order is: covariates, arm, noise, enrollment
//! offset, dropout time.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Covariates, Dataset, SurvivalObservation};
use crate::error::{Error, Result};
use crate::par;

/// Identifies the generator in dataset metadata.
pub const GENERATOR_NAME: &str = "rand_chacha::ChaCha8Rng/seed_from_u64+stream=patient; rand_distr 0.5 StandardNormal,Exp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub scenario: u8,
    pub setting: u8,
    pub n: usize,
    pub q: usize,
    pub rho: f64,
    pub beta0: f64,
    pub sigma0: f64,
    /// Prognostic coefficients; `None` uses the setting's default.
    pub beta_z: Option<Vec<f64>>,
    pub enrollment_months: f64,
    pub followup_months: f64,
    pub yearly_dropout: f64,
    /// Replaces the scenario's treatment term with a constant (no interaction).
    pub constant_treatment_effect: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: 1,
            setting: 1,
            n: 500,
            q: 50,
            rho: 1.0 / 3.0,
            beta0: 6f64.sqrt(),
            sigma0: 0.4,
            beta_z: None,
            enrollment_months: 12.0,
            followup_months: 18.0,
            yearly_dropout: 0.10,
            constant_treatment_effect: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn new(scenario: u8, setting: u8, n: usize, seed: u64) -> Self {
        Self {
            scenario,
            setting,
            n,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.scenario) {
            return Err(Error::param("scenario", format!("{} is not in 1..=6", self.scenario)));
        }
        if !(1..=2).contains(&self.setting) {
            return Err(Error::param("setting", format!("{} is not in 1..=2", self.setting)));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        if self.q == 0 {
            return Err(Error::param("q", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::param("rho", "must lie in [0, 1)"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::param("sigma0", "must be positive"));
        }
        if !self.beta0.is_finite() {
            return Err(Error::param("beta0", "must be finite"));
        }
        if let Some(b) = &self.beta_z {
            if b.len() != self.q {
                return Err(Error::DimensionMismatch {
                    what: "beta_z",
                    got: b.len(),
                    expected: self.q,
                });
            }
        }
        if !(self.enrollment_months > 0.0 && self.followup_months > 0.0) {
            return Err(Error::param("enrollment/followup", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.yearly_dropout) {
            return Err(Error::param("yearly_dropout", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn resolved_beta_z(&self) -> Vec<f64> {
        if let Some(b) = &self.beta_z {
            return b.clone();
        }
        let mut b = vec![0.0; self.q];
        if self.setting == 2 {
            for v in b.iter_mut().take(4) {
                *v = 0.4;
            }
        }
        b
    }

    /// Number of predictive variables (S1, and S2 where the scenario uses it).
    pub fn n_predictive(&self) -> usize {
        if uses_s2(self.scenario) {
            2
        } else {
            1
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec!["S1".to_string()];
        if uses_s2(self.scenario) {
            names.push("S2".to_string());
        }
        names.extend((1..=self.q).map(|j| format!("Z{j}")));
        names
    }
}

pub fn uses_s2(scenario: u8) -> bool {
    matches!(scenario, 2 | 4 | 6)
}

/// Coefficient of the arm indicator in the scenario's log-time model.
pub fn treatment_term(scenario: u8, s1: f64, s2: f64) -> Result<f64> {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(match scenario {
        1 => s1,
        2 => s1 - s2,
        3 => {
            let e = (-s1 * s1).exp();
            if (-0.67..0.67).contains(&s1) {
                2.0 * (e - 0.4)
            } else {
                2.0 * (e - 0.8)
            }
        }
        4 => 2.0 * ind((-1.07..1.07).contains(&s1) && (-1.07..1.07).contains(&s2)) - 1.0,
        5 => 2.0 * ind(s1 >= 0.67 || (-0.67..0.0).contains(&s1)) - 1.0,
        6 => 2.0 * ind((s1 >= 0.0 && s2 >= -0.67) || (s1 < 0.0 && s2 < -0.67)) - 1.0,
        other => {
            return Err(Error::param("scenario", format!("{other} is not in 1..=6")));
        }
    })
}

/// True subgroup: the treatment term is strictly positive.
pub fn true_membership(scenario: u8, s1: f64, s2: Option<f64>) -> Result<bool> {
    if uses_s2(scenario) && s2.is_none() {
        return Err(Error::param("s2", format!("scenario {scenario} needs S2")));
    }
    Ok(treatment_term(scenario, s1, s2.unwrap_or(0.0))? > 0.0)
}

fn compound_symmetric_factor(dim: usize, rho: f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
    Cholesky::new(sigma)
        .map(|c| c.l())
        .ok_or_else(|| Error::param("rho", "covariance is not positive definite"))
}

fn patient_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_row(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>) -> Vec<f64> {
    let dim = factor.nrows();
    let z = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (factor * z).iter().copied().collect()
}

/// `n` i.i.d. rows from N(0, (1 - rho) I + rho 11').
pub fn sample_covariates(n: usize, dim: usize, rho: f64, seed: u64) -> Result<Covariates> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::param("rho", "must lie in [0, 1)"));
    }
    let factor = compound_symmetric_factor(dim, rho)?;
    let rows = par::map_range(n, |i| draw_row(&mut patient_rng(seed, i), &factor));
    Covariates::from_row_major(n, dim, rows.concat())
}

struct Patient {
    covariates: Vec<f64>,
    obs: SurvivalObservation,
    member: bool,
}

/// Generates one simulated trial.
pub fn simulate(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let n_pred = config.n_predictive();
    let dim = config.q + n_pred;
    let factor = compound_symmetric_factor(dim, config.rho)?;
    let beta_z = config.resolved_beta_z();
    let monthly_dropout = -(1.0 - config.yearly_dropout).ln() / 12.0;
    let dropout = if monthly_dropout > 0.0 {
        Some(Exp::new(monthly_dropout).map_err(|e| Error::param("yearly_dropout", e.to_string()))?)
    } else {
        None
    };
    let study_end = config.enrollment_months + config.followup_months;

    let patients = par::map_range(config.n, |i| -> Result<Patient> {
        let mut rng = patient_rng(config.seed, i);
        let row = draw_row(&mut rng, &factor);
        let s1 = row[0];
        let s2 = if n_pred == 2 { row[1] } else { 0.0 };
        let z = &row[n_pred..];
        let arm = if rng.random_bool(0.5) {
            Arm::Experimental
        } else {
            Arm::Control
        };
        let eps: f64 = rng.sample(StandardNormal);
        let u = rng.random::<f64>() * config.enrollment_months;
        let c_drop = dropout.map_or(f64::INFINITY, |d| d.sample(&mut rng));

        let effect = treatment_term(config.scenario, s1, s2)?;
        let prognostic = match config.scenario {
            1..=3 => z.iter().zip(&beta_z).map(|(a, b)| a * b).sum::<f64>(),
            4 => -z.iter().zip(&beta_z).map(|(a, b)| a * b).sum::<f64>().powi(2),
            _ => -z.iter().zip(&beta_z).map(|(a, b)| a * a * b).sum::<f64>(),
        };
        let a = f64::from(arm.code());
        let shift = config.constant_treatment_effect.unwrap_or(effect);
        let t = (config.beta0 + a * shift + prognostic + config.sigma0 * eps).exp();
        let c = (study_end - u).min(c_drop);
        let obs = SurvivalObservation::new(t.min(c), t <= c, arm);
        Ok(Patient {
            covariates: row,
            obs,
            member: effect > 0.0,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(config.n * dim);
    let mut observations = Vec::with_capacity(config.n);
    let mut members = Vec::with_capacity(config.n);
    for p in patients {
        values.extend_from_slice(&p.covariates);
        observations.push(p.obs);
        members.push(p.member);
    }
    Dataset::new(
        observations,
        Covariates::from_row_major(config.n, dim, values)?,
        config.feature_names(),
        Some(members),
    )
}

/// Sidecar document written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub generator: String,
    pub config: SimConfig,
    pub feature_names: Vec<String>,
}

impl SimMetadata {
    pub fn new(config: &SimConfig) -> Self {
        Self {
            generator: GENERATOR_NAME.to_string(),
            config: config.clone(),
            feature_names: config.feature_names(),
        }
    }
}
