//! Ensemble of untrimmed trees, its validation and JSON form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeNode, TreeParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub column_names: Vec<String>,
    pub params: TreeParams,
    pub trees: Vec<DecisionTree>,
}

fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Trains `params.n_trees` trees on the same samples. Tree `i` draws from
/// its own random stream, so the result does not depend on thread count.
pub fn plant_forest(
    rows: &[Vec<f64>],
    column_names: &[String],
    targets: &[bool],
    params: &TreeParams,
) -> Result<Forest> {
    params.validate()?;
    if rows.is_empty() || column_names.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::Precondition(format!(
            "{} rows but {} target values",
            rows.len(),
            targets.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != column_names.len()) {
        return Err(Error::ColumnMismatch {
            expected: column_names.len(),
            found: r.len(),
        });
    }
    let positives = targets.iter().filter(|&&t| t).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::SingleClassTarget);
    }

    let grow = |i: usize| DecisionTree::fit(rows, targets, params, &mut tree_rng(params.seed, i));
    #[cfg(feature = "parallel")]
    let trees = (0..params.n_trees).into_par_iter().map(grow).collect();
    #[cfg(not(feature = "parallel"))]
    let trees = (0..params.n_trees).map(grow).collect();

    Ok(Forest {
        column_names: column_names.to_vec(),
        params: params.clone(),
        trees,
    })
}

/// Confusion counts of one tree on the training data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn tnr(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }

    /// Mean of true-positive and true-negative rates.
    pub fn balanced_accuracy(&self) -> f64 {
        (self.tpr() + self.tnr()) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub per_tree: Vec<Confusion>,
    /// Mean balanced accuracy over trees.
    pub learning_score: f64,
}

pub fn validate_forest(forest: &Forest, rows: &[Vec<f64>], targets: &[bool]) -> Result<ValidationReport> {
    if let Some(r) = rows.iter().find(|r| r.len() != forest.column_names.len()) {
        return Err(Error::ColumnMismatch {
            expected: forest.column_names.len(),
            found: r.len(),
        });
    }
    let positives = targets.iter().filter(|&&t| t).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::SingleClassTarget);
    }
    let per_tree: Vec<Confusion> = forest
        .trees
        .iter()
        .map(|tree| {
            let mut c = Confusion { tp: 0, fn_: 0, tn: 0, fp: 0 };
            for (row, &truth) in rows.iter().zip(targets) {
                match (truth, tree.predict(row)) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fn_ += 1,
                    (false, false) => c.tn += 1,
                    (false, true) => c.fp += 1,
                }
            }
            c
        })
        .collect();
    let learning_score = per_tree.iter().map(Confusion::balanced_accuracy).sum::<f64>() / per_tree.len() as f64;
    Ok(ValidationReport {
        per_tree,
        learning_score,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    n1: usize,
    n0: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    feature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    true_child: Option<Box<NodeJson>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    false_child: Option<Box<NodeJson>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestJson {
    columns: Vec<String>,
    params: TreeParams,
    trees: Vec<NodeJson>,
}

fn node_to_json(tree: &DecisionTree, id: usize, names: &[String]) -> NodeJson {
    let n = &tree.nodes[id];
    let child = |c: Option<usize>| c.map(|c| Box::new(node_to_json(tree, c, names)));
    NodeJson {
        n1: n.n1,
        n0: n.n0,
        feature: n.feature.map(|f| names[f].clone()),
        threshold: n.feature.map(|_| n.threshold),
        true_child: child(n.true_child),
        false_child: child(n.false_child),
    }
}

fn node_from_json(json: NodeJson, depth: usize, names: &[String], nodes: &mut Vec<TreeNode>) -> Result<usize> {
    let id = nodes.len();
    nodes.push(TreeNode {
        feature: None,
        threshold: 0.0,
        n1: json.n1,
        n0: json.n0,
        true_child: None,
        false_child: None,
        depth,
    });
    match (json.feature, json.threshold, json.true_child, json.false_child) {
        (None, None, None, None) => {}
        (Some(name), Some(threshold), Some(t), Some(f)) => {
            let feature = names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::Schema(format!("unknown feature `{name}` in forest")))?;
            if t.n1 + f.n1 != json.n1 || t.n0 + f.n0 != json.n0 {
                return Err(Error::Schema("child counts do not sum to parent counts".into()));
            }
            let t = node_from_json(*t, depth + 1, names, nodes)?;
            let f = node_from_json(*f, depth + 1, names, nodes)?;
            let node = &mut nodes[id];
            node.feature = Some(feature);
            node.threshold = threshold;
            node.true_child = Some(t);
            node.false_child = Some(f);
        }
        _ => return Err(Error::Schema("internal node needs feature, threshold and two children".into())),
    }
    Ok(id)
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Nested JSON: each node lists its class counts and, if internal, the
    /// feature name, threshold and both children.
    pub fn to_json(&self) -> Result<String> {
        let json = ForestJson {
            columns: self.column_names.clone(),
            params: self.params.clone(),
            trees: self
                .trees
                .iter()
                .map(|t| node_to_json(t, 0, &self.column_names))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let json: ForestJson = serde_json::from_str(text)?;
        let trees = json
            .trees
            .into_iter()
            .map(|root| {
                let mut nodes = Vec::new();
                node_from_json(root, 0, &json.columns, &mut nodes)?;
                Ok(DecisionTree { nodes })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            column_names: json.columns,
            params: json.params,
            trees,
        })
    }
}
