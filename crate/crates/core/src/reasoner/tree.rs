//! CART classification tree with Gini splits, per-split random feature
//! subsets and random tie-breaking.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth controls. The defaults (unlimited depth, min split 2, min leaf 1,
/// 200 trees) grow every tree to purity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows without a depth limit.
    pub max_depth: Option<usize>,
    pub min_split: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    /// Columns considered per split; `None` uses `ceil(sqrt(columns))`.
    pub feature_subset_size: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_split: 2,
            min_leaf: 1,
            n_trees: 200,
            feature_subset_size: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(m.to_string()));
        if self.max_depth == Some(0) {
            return bad("max_depth must be at least 1");
        }
        if self.min_split < 2 {
            return bad("min_split must be at least 2");
        }
        if self.min_leaf < 1 {
            return bad("min_leaf must be at least 1");
        }
        if self.n_trees < 1 {
            return bad("n_trees must be at least 1");
        }
        if self.feature_subset_size == Some(0) {
            return bad("feature_subset_size must be at least 1");
        }
        Ok(())
    }

    pub fn subset_size(&self, n_features: usize) -> usize {
        self.feature_subset_size
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// A node of a fitted tree. Samples with `x[feature] <= threshold` go to the
/// true child.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: f64,
    /// Samples with target 1.
    pub n1: usize,
    /// Samples with target 0.
    pub n0: usize,
    pub true_child: Option<usize>,
    pub false_child: Option<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    pub fn samples(&self) -> usize {
        self.n1 + self.n0
    }

    /// Majority class; a tied leaf predicts 0.
    pub fn prediction(&self) -> bool {
        self.n1 > self.n0
    }
}

/// Arena-backed tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

// weighted child Gini as an exact fraction: 2 * (a_l b_l / n_l + a_r b_r / n_r)
// up to the constant factor
#[derive(Clone, Copy)]
struct Cost {
    num: u128,
    den: u128,
}

impl Cost {
    fn new(a_l: u128, b_l: u128, a_r: u128, b_r: u128) -> Self {
        let (n_l, n_r) = (a_l + b_l, a_r + b_r);
        Cost {
            num: a_l * b_l * n_r + a_r * b_r * n_l,
            den: n_l * n_r,
        }
    }

    fn cmp(&self, other: &Cost) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    cost: Cost,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

impl DecisionTree {
    /// Grows a tree on `rows` (one `Vec` per sample) and binary `targets`.
    pub fn fit<R: Rng>(rows: &[Vec<f64>], targets: &[bool], params: &TreeParams, rng: &mut R) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        let subset = params.subset_size(n_features);
        let mut features: Vec<usize> = (0..n_features).collect();
        let mut tree = DecisionTree { nodes: Vec::new() };
        let root: Vec<usize> = (0..rows.len()).collect();
        tree.nodes.push(make_node(&root, targets, 0));

        // breadth-first, so a depth-limited tree is a prefix of a deeper one
        let mut work = VecDeque::from([(0usize, root)]);
        while let Some((id, samples)) = work.pop_front() {
            let node = &tree.nodes[id];
            let can_split = node.n1 > 0
                && node.n0 > 0
                && samples.len() >= params.min_split
                && params.max_depth.is_none_or(|d| node.depth < d);
            if !can_split {
                continue;
            }
            let depth = node.depth;
            let Some(split) = best_split(rows, targets, &samples, params.min_leaf, subset, &mut features, rng) else {
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&i| rows[i][split.feature] <= split.threshold);
            let t = tree.nodes.len();
            tree.nodes.push(make_node(&left, targets, depth + 1));
            tree.nodes.push(make_node(&right, targets, depth + 1));
            let node = &mut tree.nodes[id];
            node.feature = Some(split.feature);
            node.threshold = split.threshold;
            node.true_child = Some(t);
            node.false_child = Some(t + 1);
            work.push_back((t, left));
            work.push_back((t + 1, right));
        }
        tree
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn predict(&self, row: &[f64]) -> bool {
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            match (node.feature, node.true_child, node.false_child) {
                (Some(f), Some(t), Some(e)) => id = if row[f] <= node.threshold { t } else { e },
                _ => return node.prediction(),
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }
}

fn make_node(samples: &[usize], targets: &[bool], depth: usize) -> TreeNode {
    let n1 = samples.iter().filter(|&&i| targets[i]).count();
    TreeNode {
        feature: None,
        threshold: 0.0,
        n1,
        n0: samples.len() - n1,
        true_child: None,
        false_child: None,
        depth,
    }
}

/// Scans a shuffled feature order. The first `subset` features are always
/// evaluated; if none of them admits a valid split the scan continues until
/// one does. Equal-cost candidates are chosen uniformly at random.
fn best_split<R: Rng>(
    rows: &[Vec<f64>],
    targets: &[bool],
    samples: &[usize],
    min_leaf: usize,
    subset: usize,
    features: &mut [usize],
    rng: &mut R,
) -> Option<Split> {
    features.shuffle(rng);
    let n = samples.len();
    let total_pos = samples.iter().filter(|&&i| targets[i]).count() as u128;
    let total_neg = n as u128 - total_pos;

    let mut best: Option<Split> = None;
    let mut ties = 0u64;
    let mut sorted = samples.to_vec();
    for (k, &f) in features.iter().enumerate() {
        if k >= subset && best.is_some() {
            break;
        }
        sorted.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]));
        let (mut pos_l, mut neg_l) = (0u128, 0u128);
        for t in 1..n {
            if targets[sorted[t - 1]] {
                pos_l += 1;
            } else {
                neg_l += 1;
            }
            let (lo, hi) = (rows[sorted[t - 1]][f], rows[sorted[t]][f]);
            if lo >= hi || t < min_leaf || n - t < min_leaf {
                continue;
            }
            let cost = Cost::new(pos_l, neg_l, total_pos - pos_l, total_neg - neg_l);
            let order = best.as_ref().map(|b| cost.cmp(&b.cost));
            let take = match order {
                None | Some(std::cmp::Ordering::Less) => {
                    ties = 1;
                    true
                }
                Some(std::cmp::Ordering::Equal) => {
                    ties += 1;
                    rng.random_range(0..ties) == 0
                }
                Some(std::cmp::Ordering::Greater) => false,
            };
            if take {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    cost,
                });
            }
        }
    }
    best
}
