use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::mitigation::{suggest_mitigations, Mitigation, DEFAULT_MITIGATION_TOP_K};
use crate::reasoner::{DefCharSummary, Direction, ValidationReport};

pub const DEFAULT_FINDINGS_TOP_K: usize = 3;

/// The console and report line for a learning score.
pub fn validation_line(learning_score: f64) -> String {
    format!("{:.2}% defects have been correctly reasoned", learning_score * 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub name: String,
    pub dis: f64,
    pub duf: f64,
    pub dos: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub target: String,
    pub learning_score: f64,
    pub validation_line: String,
    pub ranking: Vec<RankedFeature>,
    pub findings: Vec<String>,
    pub mitigations: Vec<Mitigation>,
}

pub fn compose_report(summary: &DefCharSummary, validation: &ValidationReport, target: &str) -> Report {
    compose_report_with(
        summary,
        validation,
        target,
        DEFAULT_FINDINGS_TOP_K,
        DEFAULT_MITIGATION_TOP_K,
    )
}

pub fn compose_report_with(
    summary: &DefCharSummary,
    validation: &ValidationReport,
    target: &str,
    findings_k: usize,
    mitigations_k: usize,
) -> Report {
    let ranked = summary.ranked();
    let ranking: Vec<RankedFeature> = ranked
        .iter()
        .enumerate()
        .map(|(i, f)| RankedFeature {
            rank: i + 1,
            name: f.name.clone(),
            dis: f.dis,
            duf: f.duf,
            dos: f.dos,
        })
        .collect();
    let findings = ranked
        .iter()
        .take(findings_k)
        .enumerate()
        .map(|(i, f)| match &f.der {
            Some(d) => {
                let side = match d.direction {
                    Direction::Low => "lower",
                    Direction::High => "higher",
                };
                format!(
                    "{}. {} (DOS {:.3}): values in [{:.3}, {:.3}] are associated with target {}; the {} side of its splits holds most target cases.",
                    i + 1,
                    f.name,
                    f.dos,
                    d.lower,
                    d.upper,
                    target,
                    side
                )
            }
            None => format!("{}. {} (DOS {:.3}) is not used by any tree.", i + 1, f.name, f.dos),
        })
        .collect();
    Report {
        target: target.to_string(),
        learning_score: validation.learning_score,
        validation_line: validation_line(validation.learning_score),
        ranking,
        findings,
        mitigations: suggest_mitigations(summary, mitigations_k),
    }
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Reasoning report: target {}\n", self.target);
        let _ = writeln!(s, "{}\n", self.validation_line);
        let _ = writeln!(s, "## Top findings\n");
        for f in &self.findings {
            let _ = writeln!(s, "{f}");
        }
        let _ = writeln!(s, "\n## Mitigation strategies\n");
        if self.mitigations.is_empty() {
            let _ = writeln!(s, "No suggestion: no top-ranked characteristic is used by the forest.");
        }
        for m in &self.mitigations {
            let _ = writeln!(s, "- **{}**: {}", m.kind.id(), m.text);
        }
        let _ = writeln!(s, "\n## Ranking\n");
        let _ = writeln!(s, "| Rank | DefChar | DIS | DUF | DOS |");
        let _ = writeln!(s, "|---:|---|---:|---:|---:|");
        for r in &self.ranking {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:.3} |",
                r.rank, r.name, r.dis, r.duf, r.dos
            );
        }
        s
    }
}
