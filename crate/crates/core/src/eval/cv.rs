//! K-fold grid search over step size, depth and tree count.
//!
//! For each fold and `(learning_rate, max_depth)` pair a single boosting run
//! of `max(num_trees)` iterations is made; smaller tree counts are read off
//! as prefixes of that run, which is exactly what a shorter run would fit.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::metrics_for;
use crate::boost::{classify, BoostConfig, Booster};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::seeding::rng_for;
use crate::survival::TimeHorizon;
use crate::value::MembershipState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvGrid {
    pub learning_rates: Vec<f64>,
    pub max_depths: Vec<usize>,
    pub num_trees: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    /// Classification cutoff for held-out memberships.
    pub cutoff: f64,
    /// Remaining boosting parameters shared by every grid point.
    pub base: BoostConfig,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.0001, 0.0005, 0.002],
            max_depths: vec![2, 3],
            num_trees: vec![50, 100, 200],
            folds: 5,
            seed: 0,
            cutoff: 0.5,
            base: BoostConfig::default(),
        }
    }
}

impl CvGrid {
    pub fn singleton(config: BoostConfig) -> Self {
        Self {
            learning_rates: vec![config.learning_rate],
            max_depths: vec![config.max_depth],
            num_trees: vec![config.num_trees],
            base: config,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.max_depths.is_empty() || self.num_trees.is_empty() {
            return Err(Error::param("grid", "every candidate list must be nonempty"));
        }
        if self.folds < 2 {
            return Err(Error::param("folds", "must be at least 2"));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::param("cutoff", "must lie in (0, 1)"));
        }
        for c in self.configs() {
            c.validate()?;
        }
        Ok(())
    }

    /// Every grid point, ordered by the tie-break preference: fewer trees,
    /// then shallower, then smaller step.
    pub fn configs(&self) -> Vec<BoostConfig> {
        let mut k = self.num_trees.clone();
        let mut d = self.max_depths.clone();
        let mut eta = self.learning_rates.clone();
        k.sort_unstable();
        k.dedup();
        d.sort_unstable();
        d.dedup();
        eta.sort_by(f64::total_cmp);
        eta.dedup();
        let mut out = Vec::new();
        for &num_trees in &k {
            for &max_depth in &d {
                for &learning_rate in &eta {
                    out.push(BoostConfig {
                        num_trees,
                        max_depth,
                        learning_rate,
                        ..self.base
                    });
                }
            }
        }
        out
    }
}

/// Seeded shuffle split into contiguous blocks; the first `n % k` folds get
/// one extra index.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::param("folds", "must be at least 2"));
    }
    if folds > n {
        return Err(Error::param("folds", format!("{folds} folds exceed {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[0xF01D]));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub config: BoostConfig,
    /// Held-out per-patient value, one per fold.
    pub fold_values: Vec<f64>,
    pub mean_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: BoostConfig,
    pub scores: Vec<CvScore>,
}

/// Held-out values for every tree count of one `(eta, depth)` pair on one fold.
fn fold_run(
    train: &Dataset,
    holdout: &Dataset,
    config: BoostConfig,
    counts: &[usize],
    cutoff: f64,
    horizon: TimeHorizon,
) -> Result<Vec<f64>> {
    let mut booster = Booster::new(train, config, horizon)?;
    let x = holdout.covariates();
    let eta = config.learning_rate;
    let mut logits = vec![booster.model().base_logit; holdout.len()];
    let mut out = Vec::with_capacity(counts.len());
    for &k in counts {
        while booster.n_trees() < k {
            let tree = booster.step()?;
            for (i, f) in logits.iter_mut().enumerate() {
                *f += eta * tree.predict_row(x.row(i));
            }
        }
        let state = MembershipState::from_logits(logits.clone());
        let members = classify(&state, cutoff)?;
        let m = metrics_for(holdout, &MembershipState::from_hard(&members), &members, horizon)?;
        out.push(m.value_hat);
    }
    Ok(out)
}

/// Picks the grid point with the largest mean held-out value.
pub fn cross_validate(train: &Dataset, grid: &CvGrid, horizon: TimeHorizon) -> Result<CvOutcome> {
    grid.validate()?;
    let folds = fold_assignment(train.len(), grid.folds, grid.seed)?;
    let configs = grid.configs();

    let mut counts = grid.num_trees.clone();
    counts.sort_unstable();
    counts.dedup();
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for c in &configs {
        if !pairs.contains(&(c.max_depth, c.learning_rate)) {
            pairs.push((c.max_depth, c.learning_rate));
        }
    }

    let splits = folds
        .iter()
        .enumerate()
        .map(|(f, held)| {
            let rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            Ok((train.subset(&rest)?, train.subset(held)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize)> = (0..splits.len())
        .flat_map(|f| (0..pairs.len()).map(move |p| (f, p)))
        .collect();
    let results = par::map_slice(&tasks, |&(f, p)| {
        let (depth, eta) = pairs[p];
        let cfg = BoostConfig {
            max_depth: depth,
            learning_rate: eta,
            num_trees: counts[counts.len() - 1],
            ..grid.base
        };
        fold_run(&splits[f].0, &splits[f].1, cfg, &counts, grid.cutoff, horizon)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut scores = Vec::with_capacity(configs.len());
    for config in configs {
        let p = pairs
            .iter()
            .position(|&pr| pr == (config.max_depth, config.learning_rate))
            .expect("pair enumerated above");
        let k = counts.binary_search(&config.num_trees).expect("count enumerated above");
        let fold_values: Vec<f64> = (0..splits.len())
            .map(|f| results[f * pairs.len() + p][k])
            .collect();
        let mean_value = fold_values.iter().sum::<f64>() / fold_values.len() as f64;
        scores.push(CvScore {
            config,
            fold_values,
            mean_value,
        });
    }

    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.mean_value > best.mean_value {
            best = s;
        }
    }
    Ok(CvOutcome {
        best: best.config,
        scores,
    })
}
