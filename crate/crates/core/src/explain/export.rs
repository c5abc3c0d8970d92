use serde::{Deserialize, Serialize};

use super::report::Report;
use crate::error::Result;
use crate::reasoner::{DefCharSummary, EffectiveRange, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureExport {
    pub name: String,
    pub column: usize,
    pub rank: usize,
    pub dis: f64,
    pub duf: f64,
    pub dos: f64,
    pub der: Option<EffectiveRange>,
    pub node_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeRates {
    pub tpr: f64,
    pub tnr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryExport {
    pub schema_version: u32,
    pub target: String,
    pub learning_score: f64,
    pub n_trees: usize,
    pub per_tree: Vec<TreeRates>,
    /// Column order.
    pub features: Vec<FeatureExport>,
    /// Feature names by DOS descending.
    pub ranking: Vec<String>,
    pub findings: Vec<String>,
    pub mitigations: Vec<String>,
}

impl SummaryExport {
    pub fn new(summary: &DefCharSummary, validation: &ValidationReport, report: &Report) -> Self {
        let rank_of = |name: &str| {
            report
                .ranking
                .iter()
                .find(|r| r.name == name)
                .map_or(0, |r| r.rank)
        };
        SummaryExport {
            schema_version: SCHEMA_VERSION,
            target: report.target.clone(),
            learning_score: validation.learning_score,
            n_trees: summary.n_trees,
            per_tree: validation
                .per_tree
                .iter()
                .map(|c| TreeRates {
                    tpr: c.tpr(),
                    tnr: c.tnr(),
                })
                .collect(),
            features: summary
                .features
                .iter()
                .map(|f| FeatureExport {
                    name: f.name.clone(),
                    column: f.column,
                    rank: rank_of(&f.name),
                    dis: f.dis,
                    duf: f.duf,
                    dos: f.dos,
                    der: f.der,
                    node_count: f.node_count,
                })
                .collect(),
            ranking: report.ranking.iter().map(|r| r.name.clone()).collect(),
            findings: report.findings.clone(),
            mitigations: report.mitigations.iter().map(|m| m.kind.id().to_string()).collect(),
        }
    }
}

pub fn export_json(summary: &DefCharSummary, validation: &ValidationReport, report: &Report) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&SummaryExport::new(summary, validation, report))?;
    text.push('\n');
    Ok(text)
}

pub fn parse_export(text: &str) -> Result<SummaryExport> {
    Ok(serde_json::from_str(text)?)
}
