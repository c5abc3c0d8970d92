//! Per-node scores: decision score, distinguish score, usage, importance
//! index and the degree/status bonuses.

use serde::{Deserialize, Serialize};

use super::forest::Forest;
use crate::error::{Error, Result};

/// An internal node with the class counts of itself and its children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub tree_index: usize,
    pub node_index: usize,
    pub feature: usize,
    pub threshold: f64,
    pub depth: usize,
    /// Sample count at the root of the owning tree.
    pub root_samples: usize,
    pub n1: usize,
    pub n0: usize,
    pub tc1: usize,
    pub tc0: usize,
    pub fc1: usize,
    pub fc0: usize,
}

/// Internal nodes of every tree, depth-first pre-order, true child first.
pub fn climb_forest(forest: &Forest) -> Vec<NodeRecord> {
    let mut out = Vec::new();
    for (t, tree) in forest.trees.iter().enumerate() {
        let root_samples = tree.root().samples();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &tree.nodes[id];
            let (Some(feature), Some(tc), Some(fc)) = (node.feature, node.true_child, node.false_child) else {
                continue;
            };
            let (tc_node, fc_node) = (&tree.nodes[tc], &tree.nodes[fc]);
            out.push(NodeRecord {
                tree_index: t,
                node_index: id,
                feature,
                threshold: node.threshold,
                depth: node.depth,
                root_samples,
                n1: node.n1,
                n0: node.n0,
                tc1: tc_node.n1,
                tc0: tc_node.n0,
                fc1: fc_node.n1,
                fc0: fc_node.n0,
            });
            stack.push(fc);
            stack.push(tc);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degree {
    Empty,
    Weak,
    Middle,
    Strong,
    Full,
}

impl Degree {
    pub fn bonus(self) -> f64 {
        match self {
            Degree::Empty => 0.0,
            Degree::Weak => 0.1,
            Degree::Middle => 0.2,
            Degree::Strong => 0.3,
            Degree::Full => 0.5,
        }
    }

    /// Classifies `TS = num / den` without rounding.
    fn from_ratio(num: u128, den: u128) -> Degree {
        if num == 0 {
            Degree::Empty
        } else if 4 * num < den {
            Degree::Weak
        } else if 2 * num < den {
            Degree::Middle
        } else if num < den {
            Degree::Strong
        } else {
            Degree::Full
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Confirmation,
    HalfReduction,
    Reduction,
}

impl Status {
    pub fn bonus(self) -> f64 {
        match self {
            Status::Confirmation => 0.5,
            Status::HalfReduction => 0.2,
            Status::Reduction => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeAnalysis {
    pub record: NodeRecord,
    pub ds: f64,
    pub ts: f64,
    pub u: f64,
    pub deg: Degree,
    pub sta: Status,
    pub b_deg: f64,
    pub b_sta: f64,
    pub idx: f64,
    /// True when the `<=` child holds at least as many target-1 samples.
    pub dir: bool,
}

pub fn analyse_node(record: &NodeRecord, total: usize) -> Result<NodeAnalysis> {
    let r = record;
    if r.n1 == 0 || r.n0 == 0 {
        return Err(Error::PureNode {
            tree: r.tree_index,
            node: r.node_index,
            n1: r.n1,
            n0: r.n0,
        });
    }
    if r.tc1 + r.fc1 != r.n1 || r.tc0 + r.fc0 != r.n0 {
        return Err(Error::Precondition(format!(
            "node {}:{} child counts do not sum to its own",
            r.tree_index, r.node_index
        )));
    }
    if total < r.n1 + r.n0 {
        return Err(Error::Precondition(format!(
            "node {}:{} holds more samples than the root",
            r.tree_index, r.node_index
        )));
    }
    let (n1, n0) = (r.n1 as f64, r.n0 as f64);
    let (tc1, tc0, fc1, fc0) = (r.tc1 as f64, r.tc0 as f64, r.fc1 as f64, r.fc0 as f64);

    let ds = 0.5 * (((tc1 - fc1) / n1).abs() + ((tc0 - fc0) / n0).abs());
    let ts = (tc1 / n1 - tc0 / n0).abs();
    let ts_false = (fc1 / n1 - fc0 / n0).abs();
    assert!(
        (ts - ts_false).abs() <= 1e-12,
        "distinguish score differs between children: {ts} vs {ts_false}"
    );
    let u = (n1 + n0) / total as f64;

    let cross = (r.tc1 as i128 * r.n0 as i128 - r.tc0 as i128 * r.n1 as i128).unsigned_abs();
    let deg = Degree::from_ratio(cross, r.n1 as u128 * r.n0 as u128);
    let sta = if r.tc1 == 0 || r.tc0 == 0 {
        Status::Confirmation
    } else if r.tc1 == r.fc1 || r.tc0 == r.fc0 {
        Status::HalfReduction
    } else {
        Status::Reduction
    };
    let (b_deg, b_sta) = (deg.bonus(), sta.bonus());
    let idx = u * ((1.0 + ds) * ts + b_deg + b_sta);
    Ok(NodeAnalysis {
        record: r.clone(),
        ds,
        ts,
        u,
        deg,
        sta,
        b_deg,
        b_sta,
        idx,
        dir: r.tc1 >= r.fc1,
    })
}

/// Analyses every record against its own tree's root sample count.
pub fn analyse_forest(records: &[NodeRecord]) -> Result<Vec<NodeAnalysis>> {
    records.iter().map(|r| analyse_node(r, r.root_samples)).collect()
}
