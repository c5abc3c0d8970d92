//! Tree-ensemble reasoning over the DefChar matrix.

pub mod analysis;
pub mod forest;
pub mod summary;
pub mod tree;

pub use analysis::{analyse_forest, analyse_node, climb_forest, Degree, NodeAnalysis, NodeRecord, Status};
pub use forest::{plant_forest, validate_forest, Confusion, Forest, ValidationReport};
pub use summary::{summarise_forest, DefCharSummary, Direction, EffectiveRange, FeatureSummary};
pub use tree::{DecisionTree, TreeNode, TreeParams};

use crate::defchar::DefCharMatrix;
use crate::error::Result;

/// Everything produced for one reasoning target.
#[derive(Clone, Debug)]
pub struct Reasoning {
    pub forest: Forest,
    pub validation: ValidationReport,
    pub analyses: Vec<NodeAnalysis>,
    pub summary: DefCharSummary,
}

/// Plants, validates, climbs, analyses and summarises in one call.
pub fn reason(matrix: &DefCharMatrix, targets: &[bool], params: &TreeParams) -> Result<Reasoning> {
    let forest = plant_forest(&matrix.scaled, &matrix.column_names, targets, params)?;
    let validation = validate_forest(&forest, &matrix.scaled, targets)?;
    let analyses = analyse_forest(&climb_forest(&forest))?;
    let summary = summarise_forest(&analyses, &forest, &matrix.scaling)?;
    Ok(Reasoning {
        forest,
        validation,
        analyses,
        summary,
    })
}
