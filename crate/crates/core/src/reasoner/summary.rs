//! Per-characteristic aggregation of node scores.

use serde::{Deserialize, Serialize};

use super::analysis::NodeAnalysis;
use super::forest::Forest;
use crate::defchar::ColumnScale;
use crate::error::{Error, Result};

/// Which side of the split holds the target-1 majority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Values at or below the range's upper end.
    Low,
    /// Values at or above the range's lower end.
    High,
}

/// Effective value range in original units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRange {
    pub lower: f64,
    pub upper: f64,
    pub direction: Direction,
}

impl EffectiveRange {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub column: usize,
    pub name: String,
    /// Mean importance index of the nodes splitting on this feature.
    pub dis: f64,
    /// Nodes splitting on this feature per tree.
    pub duf: f64,
    /// `(3 * dis + duf) / 4`.
    pub dos: f64,
    pub der: Option<EffectiveRange>,
    pub node_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefCharSummary {
    pub n_trees: usize,
    /// One entry per forest column, in column order.
    pub features: Vec<FeatureSummary>,
}

impl DefCharSummary {
    /// Features ordered by DOS descending, ties by name.
    pub fn ranked(&self) -> Vec<&FeatureSummary> {
        let mut v: Vec<&FeatureSummary> = self.features.iter().collect();
        v.sort_by(|a, b| b.dos.total_cmp(&a.dos).then_with(|| a.name.cmp(&b.name)));
        v
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSummary> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Groups analyses by feature. Each node contributes the scaled interval
/// `[0, threshold]` if its `<=` child holds the target-1 majority, otherwise
/// `[threshold, 1]`; the range is the IDX-weighted mean of those intervals
/// (plain mean when every weight is zero), mapped back through `scaling`.
pub fn summarise_forest(
    analyses: &[NodeAnalysis],
    forest: &Forest,
    scaling: &[ColumnScale],
) -> Result<DefCharSummary> {
    if analyses.is_empty() {
        return Err(Error::Precondition("no analysed nodes to summarise".into()));
    }
    let n_cols = forest.column_names.len();
    if scaling.len() != n_cols {
        return Err(Error::ColumnMismatch {
            expected: n_cols,
            found: scaling.len(),
        });
    }
    let n_trees = forest.n_trees();
    let features = (0..n_cols)
        .map(|c| {
            let group: Vec<&NodeAnalysis> = analyses.iter().filter(|a| a.record.feature == c).collect();
            let name = forest.column_names[c].clone();
            if group.is_empty() {
                return FeatureSummary {
                    column: c,
                    name,
                    dis: 0.0,
                    duf: 0.0,
                    dos: 0.0,
                    der: None,
                    node_count: 0,
                };
            }
            let k = group.len() as f64;
            let dis = group.iter().map(|a| a.idx).sum::<f64>() / k;
            let duf = k / n_trees as f64;
            FeatureSummary {
                column: c,
                name,
                dis,
                duf,
                dos: (3.0 * dis + duf) / 4.0,
                der: Some(effective_range(&group, &scaling[c])),
                node_count: group.len(),
            }
        })
        .collect();
    Ok(DefCharSummary { n_trees, features })
}

fn effective_range(group: &[&NodeAnalysis], scale: &ColumnScale) -> EffectiveRange {
    let interval = |a: &NodeAnalysis| {
        if a.dir {
            (0.0, a.record.threshold)
        } else {
            (a.record.threshold, 1.0)
        }
    };
    let total: f64 = group.iter().map(|a| a.idx).sum();
    let weight = |a: &NodeAnalysis| if total > 0.0 { a.idx } else { 1.0 };
    let norm: f64 = group.iter().map(|a| weight(a)).sum();
    let (mut lower, mut upper, mut low_w, mut high_w) = (0.0, 0.0, 0.0, 0.0);
    for a in group {
        let (lo, hi) = interval(a);
        let w = weight(a);
        lower += w * lo;
        upper += w * hi;
        if a.dir {
            low_w += w;
        } else {
            high_w += w;
        }
    }
    let (lower, upper) = (lower / norm, upper / norm);
    EffectiveRange {
        lower: scale.unscale(lower),
        upper: scale.unscale(upper.max(lower)),
        direction: if low_w >= high_w { Direction::Low } else { Direction::High },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::analysis::{analyse_node, NodeRecord};
    use crate::reasoner::tree::{DecisionTree, TreeParams};

    fn forest(names: &[&str], n_trees: usize) -> Forest {
        Forest {
            column_names: names.iter().map(|s| s.to_string()).collect(),
            params: TreeParams::default(),
            trees: vec![DecisionTree { nodes: vec![] }; n_trees],
        }
    }

    fn node(tree: usize, feature: usize, threshold: f64, tc1: usize, tc0: usize) -> NodeAnalysis {
        let r = NodeRecord {
            tree_index: tree,
            node_index: 0,
            feature,
            threshold,
            depth: 0,
            root_samples: 20,
            n1: 10,
            n0: 10,
            tc1,
            tc0,
            fc1: 10 - tc1,
            fc0: 10 - tc0,
        };
        analyse_node(&r, 20).unwrap()
    }

    #[test]
    fn stumps_with_full_index() {
        let a: Vec<NodeAnalysis> = (0..200).map(|t| node(t, 0, 0.4, 10, 0)).collect();
        let scale = [ColumnScale { min: 0.0, max: 200.0 }, ColumnScale { min: 0.0, max: 1.0 }];
        let s = summarise_forest(&a, &forest(&["x", "y"], 200), &scale).unwrap();
        let x = &s.features[0];
        assert_eq!((x.dis, x.duf, x.dos), (3.0, 1.0, 2.5));
        let der = x.der.unwrap();
        assert_eq!((der.lower, der.direction), (0.0, Direction::Low));
        assert!((der.upper - 80.0).abs() < 1e-9);
        let y = &s.features[1];
        assert_eq!((y.dos, y.der, y.node_count), (0.0, None, 0));
        assert_eq!(s.ranked()[0].name, "x");
    }

    #[test]
    fn high_direction_interval() {
        let a = vec![node(0, 0, 0.25, 0, 10)];
        let s = summarise_forest(&a, &forest(&["x"], 1), &[ColumnScale { min: 10.0, max: 50.0 }]).unwrap();
        let der = s.features[0].der.unwrap();
        assert_eq!((der.lower, der.upper, der.direction), (20.0, 50.0, Direction::High));
    }

    #[test]
    fn weighted_by_index() {
        // idx 3.0 at 0.2 (low) and idx u*0.2 = 0.2 at 0.8 (symmetric split, low)
        let a = vec![node(0, 0, 0.2, 10, 0), node(0, 0, 0.8, 5, 5)];
        let s = summarise_forest(&a, &forest(&["x"], 1), &[ColumnScale { min: 0.0, max: 1.0 }]).unwrap();
        let der = s.features[0].der.unwrap();
        let expect = (3.0 * 0.2 + 0.2 * 0.8) / 3.2;
        assert!((der.upper - expect).abs() < 1e-12);
        assert_eq!(der.lower, 0.0);
    }

    #[test]
    fn ranking_ties_by_name() {
        let a = vec![node(0, 1, 0.5, 10, 0), node(0, 0, 0.5, 10, 0)];
        let s = summarise_forest(&a, &forest(&["b", "a"], 1), &[ColumnScale { min: 0.0, max: 1.0 }; 2]).unwrap();
        let names: Vec<&str> = s.ranked().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["a", "b"]);
    }

    #[test]
    fn empty_analyses_rejected() {
        assert!(summarise_forest(&[], &forest(&["x"], 1), &[ColumnScale { min: 0.0, max: 1.0 }]).is_err());
    }
}
