use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::BoostConfig;
use super::tree::{fit_tree_sorted, SortedColumns, Tree};
use crate::data::{Covariates, Dataset};
use crate::error::{Error, Result};
use crate::survival::TimeHorizon;
use crate::value::{value_gradient, value_hat, MembershipState};

/// Additive logit model `F = base_logit + learning_rate * sum_k tree_k(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostedModel {
    pub config: BoostConfig,
    pub base_logit: f64,
    pub horizon: TimeHorizon,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Training `-V` before the first tree and after each tree.
    #[serde(default)]
    pub training_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn empty(config: BoostConfig, horizon: TimeHorizon, feature_names: Vec<String>) -> Self {
        Self {
            config,
            base_logit: 0.0,
            horizon,
            feature_names,
            trees: Vec::new(),
            training_loss: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Model restricted to its first `k` trees.
    pub fn truncated(&self, k: usize) -> BoostedModel {
        let k = k.min(self.trees.len());
        let mut m = self.clone();
        m.trees.truncate(k);
        m.training_loss.truncate(k + 1);
        m.config.num_trees = k;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_g17(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BoostedModel = serde_json::from_str(text)?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Stepwise boosting state over one training set.
pub struct Booster<'a> {
    data: &'a Dataset,
    sorted: SortedColumns,
    logits: Vec<f64>,
    model: BoostedModel,
}

impl<'a> Booster<'a> {
    pub fn new(data: &'a Dataset, config: BoostConfig, horizon: TimeHorizon) -> Result<Self> {
        config.validate()?;
        let mut model = BoostedModel::empty(config, horizon, data.feature_names().to_vec());
        let logits = vec![model.base_logit; data.len()];
        let loss = -value_hat(data, &MembershipState::from_logits(logits.clone()), horizon)?.value;
        model.training_loss.push(loss);
        Ok(Self {
            data,
            sorted: SortedColumns::new(data.covariates()),
            logits,
            model,
        })
    }

    /// Adds one tree fitted to the current gradient.
    pub fn step(&mut self) -> Result<&Tree> {
        let horizon = self.model.horizon;
        let state = MembershipState::from_logits(self.logits.clone());
        let grad = value_gradient(self.data, &state, horizon)?;
        let tree = fit_tree_sorted(
            self.data.covariates(),
            &self.sorted,
            &grad.values,
            &self.model.config,
        )?;
        let eta = self.model.config.learning_rate;
        let x = self.data.covariates();
        for (i, f) in self.logits.iter_mut().enumerate() {
            *f += eta * tree.predict_row(x.row(i));
        }
        if self.logits.iter().any(|f| f.is_nan()) {
            return Err(Error::NonFinite("boosted logits"));
        }
        let loss = -value_hat(
            self.data,
            &MembershipState::from_logits(self.logits.clone()),
            horizon,
        )?
        .value;
        self.model.training_loss.push(loss);
        self.model.trees.push(tree);
        Ok(self.model.trees.last().expect("just pushed"))
    }

    pub fn n_trees(&self) -> usize {
        self.model.trees.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn model(&self) -> &BoostedModel {
        &self.model
    }

    pub fn finish(mut self) -> BoostedModel {
        self.model.config.num_trees = self.model.config.num_trees.max(self.model.trees.len());
        self.model
    }
}

/// Runs `config.num_trees` boosting iterations from `F = 0`.
pub fn boost_fit(data: &Dataset, config: &BoostConfig, horizon: TimeHorizon) -> Result<BoostedModel> {
    let mut b = Booster::new(data, *config, horizon)?;
    for _ in 0..config.num_trees {
        b.step()?;
    }
    Ok(b.finish())
}

/// Logits and clipped scores for each covariate row.
pub fn predict_scores(model: &BoostedModel, covariates: &Covariates) -> Result<MembershipState> {
    if covariates.n_cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            what: "feature count",
            got: covariates.n_cols(),
            expected: model.n_features(),
        });
    }
    let eta = model.config.learning_rate;
    let logits = (0..covariates.n_rows())
        .map(|i| {
            let row = covariates.row(i);
            let mut f = model.base_logit;
            for t in &model.trees {
                f += eta * t.predict_row(row);
            }
            f
        })
        .collect();
    Ok(MembershipState::from_logits(logits))
}

/// Membership is 1 exactly when the score exceeds `cutoff`.
pub fn classify(state: &MembershipState, cutoff: f64) -> Result<Vec<bool>> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::param("cutoff", format!("{cutoff} is outside (0, 1)")));
    }
    Ok(state.scores().iter().map(|&p| p > cutoff).collect())
}

/// Total split gain per feature with rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportance {
    pub feature_names: Vec<String>,
    pub gain: Vec<f64>,
    /// 1 = largest gain. Zero-gain features share the rank
    /// `positive_count + median(1..=zero_count)`.
    pub rank: Vec<f64>,
}

impl VariableImportance {
    pub fn rank_of(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.rank[i])
    }
}

pub fn variable_importance(model: &BoostedModel) -> Result<VariableImportance> {
    if model.trees.is_empty() {
        return Err(Error::EmptyModel);
    }
    let q = model.n_features();
    let mut gain = vec![0.0; q];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let Some(f) = node.split_feature {
                gain[f] += node.gain;
            }
        }
    }
    let mut positive: Vec<usize> = (0..q).filter(|&j| gain[j] > 0.0).collect();
    positive.sort_by(|&a, &b| gain[b].total_cmp(&gain[a]).then(a.cmp(&b)));
    let zero_count = q - positive.len();
    let zero_rank = positive.len() as f64 + (zero_count as f64 + 1.0) / 2.0;
    let mut rank = vec![zero_rank; q];
    for (r, &j) in positive.iter().enumerate() {
        rank[j] = (r + 1) as f64;
    }
    Ok(VariableImportance {
        feature_names: model.feature_names.clone(),
        gain,
        rank,
    })
}
