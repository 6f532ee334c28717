//! Monte Carlo benchmark over simulated trials.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvGrid};
use super::metrics::{evaluate, Metrics};
use crate::boost::{boost_fit, variable_importance, BoostConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::seeding::derive_seed;
use crate::simgen::{simulate, SimConfig};
use crate::survival::TimeHorizon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkRequest {
    pub scenarios: Vec<u8>,
    pub setting: u8,
    pub replicates: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub grid: CvGrid,
    pub cutoff: f64,
    pub seed: u64,
    /// Template for every simulated trial; scenario, setting, size and seed
    /// are overwritten per replicate.
    pub sim: SimConfig,
}

impl Default for BenchmarkRequest {
    fn default() -> Self {
        Self {
            scenarios: vec![1, 2, 3, 4, 5, 6],
            setting: 1,
            replicates: 10,
            n_train: 500,
            n_valid: 2000,
            grid: CvGrid::default(),
            cutoff: 0.5,
            seed: 0,
            sim: SimConfig::default(),
        }
    }
}

/// One replicate's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub selected: BoostConfig,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single replicate.
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: u8,
    pub setting: u8,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<MetricSummary>,
}

impl CellReport {
    pub fn summary_of(&self, metric: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|s| s.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub cells: Vec<CellReport>,
    pub replicate_count: usize,
    pub wall_time_secs: f64,
}

impl BenchmarkReport {
    pub fn cell(&self, scenario: u8, setting: u8) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.setting == setting)
    }
}

pub fn replicate_seed(master: u64, scenario: u8, setting: u8, replicate: usize) -> u64 {
    derive_seed(master, &[u64::from(scenario), u64::from(setting), replicate as u64])
}

fn run_replicate(req: &BenchmarkRequest, scenario: u8, replicate: usize) -> Result<ReplicateResult> {
    let seed = replicate_seed(req.seed, scenario, req.setting, replicate);
    let sim = SimConfig {
        scenario,
        setting: req.setting,
        n: req.n_train + req.n_valid,
        seed,
        ..req.sim.clone()
    };
    let all = simulate(&sim)?;
    let train_idx: Vec<usize> = (0..req.n_train).collect();
    let valid_idx: Vec<usize> = (req.n_train..sim.n).collect();
    let train = all.subset(&train_idx)?;
    let valid = all.subset(&valid_idx)?;

    let train_horizon = TimeHorizon::auto(&train);
    let grid = CvGrid {
        seed: derive_seed(seed, &[0xC5]),
        ..req.grid.clone()
    };
    let selected = cross_validate(&train, &grid, train_horizon)?.best;
    let model = boost_fit(&train, &selected, train_horizon)?;
    let mut metrics = evaluate(&model, &valid, req.cutoff, TimeHorizon::auto(&valid))?;
    if !model.trees.is_empty() {
        let imp = variable_importance(&model)?;
        metrics.s1_rank = imp.rank_of("S1");
        metrics.s2_rank = imp.rank_of("S2");
    }
    Ok(ReplicateResult {
        replicate,
        seed,
        selected,
        metrics,
    })
}

fn summarize(metric: &str, values: &[f64]) -> MetricSummary {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let sd = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    MetricSummary {
        metric: metric.to_string(),
        mean,
        sd,
        count,
    }
}

pub const METRIC_NAMES: [&str; 6] = [
    "value_hat",
    "accuracy",
    "sensitivity",
    "specificity",
    "s1_rank",
    "s2_rank",
];

fn metric_value(m: &Metrics, name: &str) -> Option<f64> {
    match name {
        "value_hat" => Some(m.value_hat),
        "accuracy" => m.accuracy,
        "sensitivity" => m.sensitivity,
        "specificity" => m.specificity,
        "s1_rank" => m.s1_rank,
        "s2_rank" => m.s2_rank,
        _ => None,
    }
}

/// Simulate, tune, fit and validate `replicates` trials per scenario.
pub fn benchmark(req: &BenchmarkRequest) -> Result<BenchmarkReport> {
    if req.replicates == 0 {
        return Err(Error::param("replicates", "must be at least 1"));
    }
    if req.scenarios.is_empty() {
        return Err(Error::param("scenarios", "must be nonempty"));
    }
    if req.n_train < req.grid.folds || req.n_valid == 0 {
        return Err(Error::param("n_train/n_valid", "too small for the requested folds"));
    }
    for &s in &req.scenarios {
        SimConfig::new(s, req.setting, 1, 0).validate()?;
    }
    let start = Instant::now();
    let tasks: Vec<(u8, usize)> = req
        .scenarios
        .iter()
        .flat_map(|&s| (0..req.replicates).map(move |r| (s, r)))
        .collect();
    let results = par::map_slice(&tasks, |&(s, r)| run_replicate(req, s, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(req.scenarios.len());
    for (c, &scenario) in req.scenarios.iter().enumerate() {
        let replicates = results[c * req.replicates..(c + 1) * req.replicates].to_vec();
        let summary = METRIC_NAMES
            .iter()
            .filter_map(|&name| {
                let vals: Vec<f64> = replicates
                    .iter()
                    .filter_map(|r| metric_value(&r.metrics, name))
                    .collect();
                (!vals.is_empty()).then(|| summarize(name, &vals))
            })
            .collect();
        cells.push(CellReport {
            scenario,
            setting: req.setting,
            replicates,
            summary,
        });
    }
    Ok(BenchmarkReport {
        cells,
        replicate_count: req.replicates,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
