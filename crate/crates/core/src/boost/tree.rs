//! Exact greedy regression trees on per-patient gradients.

use serde::{Deserialize, Serialize};

use super::config::BoostConfig;
use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `None` marks a leaf.
    pub split_feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub leaf_value: f64,
    pub gain: f64,
    pub cover: f64,
}

/// Binary tree stored as a flat node array; node 0 is the root. Rows with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self {
            nodes: vec![Node {
                split_feature: None,
                threshold: 0.0,
                left: 0,
                right: 0,
                leaf_value: value,
                gain: 0.0,
                cover,
            }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while let Some(f) = node.split_feature {
            node = if row[f] < node.threshold {
                &self.nodes[node.left]
            } else {
                &self.nodes[node.right]
            };
        }
        node.leaf_value
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].split_feature {
                None => 0,
                Some(_) => 1 + walk(nodes, nodes[i].left).max(walk(nodes, nodes[i].right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split_feature.is_none()).count()
    }
}

/// Row indices sorted by each feature, computed once per boosting run.
#[derive(Debug, Clone)]
pub(crate) struct SortedColumns {
    pub orders: Vec<Vec<usize>>,
}

impl SortedColumns {
    pub fn new(x: &Covariates) -> Self {
        let orders = par::map_range(x.n_cols(), |j| {
            let mut idx: Vec<usize> = (0..x.n_rows()).collect();
            idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
            idx
        });
        Self { orders }
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a Covariates,
    g: &'a [f64],
    cfg: &'a BoostConfig,
    nodes: Vec<Node>,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Relative gain difference below which two splits count as tied. Gains of
/// the same partition reached through different sort orders can differ in
/// the last bits.
const TIE_TOL: f64 = 1e-12;

fn beats(gain: f64, best: Option<Split>) -> bool {
    best.is_none_or(|b| gain > b.gain + TIE_TOL * b.gain.abs())
}

impl Builder<'_> {
    fn leaf_value(&self, g_sum: f64, count: usize) -> f64 {
        -g_sum / (self.cfg.hessian_const * count as f64 + self.cfg.lambda_l2)
    }

    /// Best split of one feature given the node's rows sorted by it.
    fn best_for_feature(&self, feature: usize, rows: &[usize], g_total: f64) -> Option<Split> {
        let cfg = self.cfg;
        let h0 = cfg.hessian_const;
        let n = rows.len();
        let h_total = h0 * n as f64;
        let parent = score(g_total, h_total, cfg.lambda_l2);
        let mut best: Option<Split> = None;
        let mut g_left = 0.0;
        for k in 0..n.saturating_sub(1) {
            g_left += self.g[rows[k]];
            let lo = self.x.get(rows[k], feature);
            let hi = self.x.get(rows[k + 1], feature);
            if lo >= hi {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < cfg.min_samples_leaf || n_right < cfg.min_samples_leaf {
                continue;
            }
            let h_left = h0 * n_left as f64;
            let h_right = h0 * n_right as f64;
            if h_left < cfg.min_child_weight || h_right < cfg.min_child_weight {
                continue;
            }
            let g_right = g_total - g_left;
            let gain = 0.5
                * (score(g_left, h_left, cfg.lambda_l2) + score(g_right, h_right, cfg.lambda_l2)
                    - parent)
                - cfg.gamma_split;
            if gain > 0.0 && beats(gain, best) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(Split {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
        best
    }

    /// `sorted[j]` holds this node's rows ordered by feature `j`.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let count = rows.len();
        // sum in row-index order so the value is independent of feature layout
        let mut by_index = rows.clone();
        by_index.sort_unstable();
        let g_total: f64 = by_index.iter().map(|&i| self.g[i]).sum();
        let cover = self.cfg.hessian_const * count as f64;
        let id = self.nodes.len();
        self.nodes.push(Node {
            split_feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            leaf_value: self.leaf_value(g_total, count),
            gain: 0.0,
            cover,
        });
        if depth >= self.cfg.max_depth || count < 2 {
            return id;
        }

        let candidates = {
            let this = &*self;
            par::map_range(sorted.len(), |j| this.best_for_feature(j, &sorted[j], g_total))
        };
        let mut best: Option<Split> = None;
        for s in candidates.into_iter().flatten() {
            if beats(s.gain, best) {
                best = Some(s);
            }
        }
        let Some(split) = best else {
            return id;
        };

        let goes_left = |r: usize| self.x.get(r, split.feature) < split.threshold;
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&r| goes_left(r));
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(sorted);
        let left = self.grow(left_sorted, depth + 1);
        let right = self.grow(right_sorted, depth + 1);
        let node = &mut self.nodes[id];
        node.split_feature = Some(split.feature);
        node.threshold = split.threshold;
        node.gain = split.gain;
        node.left = left;
        node.right = right;
        id
    }
}

fn check_inputs(x: &Covariates, gradients: &[f64]) -> Result<()> {
    if gradients.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            what: "gradients",
            got: gradients.len(),
            expected: x.n_rows(),
        });
    }
    if x.n_rows() == 0 {
        return Err(Error::param("covariates", "cannot fit a tree on zero rows"));
    }
    if gradients.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradients"));
    }
    Ok(())
}

pub(crate) fn fit_tree_sorted(
    x: &Covariates,
    sorted: &SortedColumns,
    gradients: &[f64],
    config: &BoostConfig,
) -> Result<Tree> {
    check_inputs(x, gradients)?;
    let mut b = Builder {
        x,
        g: gradients,
        cfg: config,
        nodes: Vec::new(),
    };
    let lists = if x.n_cols() == 0 {
        vec![(0..x.n_rows()).collect()]
    } else {
        sorted.orders.clone()
    };
    b.grow(lists, 0);
    Ok(Tree { nodes: b.nodes })
}

/// Fits one regression tree to `gradients` by exact greedy search.
///
/// Each node with gradient sum `G` over `m` rows has curvature
/// `H = hessian_const * m` and leaf value `-G / (H + lambda)`. A split is
/// taken when its structure-score gain is positive and both children meet
/// the size and curvature minimums; equal gains go to the lower feature,
/// then the lower threshold.
pub fn fit_tree(covariates: &Covariates, gradients: &[f64], config: &BoostConfig) -> Result<Tree> {
    config.validate()?;
    check_inputs(covariates, gradients)?;
    let sorted = SortedColumns::new(covariates);
    fit_tree_sorted(covariates, &sorted, gradients, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lambda: f64, gamma: f64, depth: usize) -> BoostConfig {
        BoostConfig {
            lambda_l2: lambda,
            gamma_split: gamma,
            max_depth: depth,
            ..Default::default()
        }
    }

    fn column(x: &[f64]) -> Covariates {
        Covariates::from_row_major(x.len(), 1, x.to_vec()).unwrap()
    }

    #[test]
    fn three_point_split() {
        let t = fit_tree(&column(&[1.0, 2.0, 3.0]), &[-2.0, -2.0, 4.0], &cfg(0.0, 0.0, 1)).unwrap();
        let root = &t.nodes[0];
        assert_eq!(root.split_feature, Some(0));
        assert_eq!(root.threshold, 2.5);
        assert!((root.gain - 12000.0).abs() < 1e-6);
        assert!((t.nodes[root.left].leaf_value - 2000.0).abs() < 1e-9);
        assert!((t.nodes[root.right].leaf_value + 4000.0).abs() < 1e-9);
    }

    #[test]
    fn constant_gradients_give_one_leaf() {
        let t = fit_tree(&column(&[1.0, 2.0, 3.0, 4.0]), &[0.5; 4], &cfg(1.0, 0.0, 3)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!((t.nodes[0].leaf_value + 2.0 / (0.004 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn large_gamma_blocks_splits() {
        let t = fit_tree(&column(&[1.0, 2.0, 3.0]), &[-2.0, -2.0, 4.0], &cfg(0.0, 1e5, 2)).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn single_row_is_leaf_and_empty_is_error() {
        let t = fit_tree(&column(&[1.0]), &[3.0], &cfg(1.0, 0.0, 2)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!(fit_tree(&column(&[]), &[], &cfg(1.0, 0.0, 2)).is_err());
        assert!(fit_tree(&column(&[1.0, 2.0]), &[f64::NAN, 1.0], &cfg(1.0, 0.0, 2)).is_err());
    }

    #[test]
    fn tie_goes_to_lower_feature() {
        // two identical columns
        let x = Covariates::from_row_major(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let t = fit_tree(&x, &[-2.0, -2.0, 4.0], &cfg(0.0, 0.0, 1)).unwrap();
        assert_eq!(t.nodes[0].split_feature, Some(0));
    }

    #[test]
    fn min_samples_leaf_respected() {
        let c = BoostConfig {
            min_samples_leaf: 2,
            ..cfg(0.0, 0.0, 1)
        };
        let t = fit_tree(&column(&[1.0, 2.0, 3.0]), &[-2.0, 4.0, 4.0], &c).unwrap();
        // the best unconstrained split isolates row 0
        if t.nodes[0].split_feature.is_some() {
            assert!(t.nodes[0].threshold > 2.0);
        }
    }

    #[test]
    fn routing_on_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = fit_tree(&column(&[a, b]), &[-1.0, 1.0], &cfg(0.0, 0.0, 1)).unwrap();
        assert!(t.predict_row(&[a]) > 0.0);
        assert!(t.predict_row(&[b]) < 0.0);
    }
}
