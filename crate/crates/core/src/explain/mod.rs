//! Charts, report and mitigation suggestions for one reasoning target.

pub mod chart;
pub mod export;
pub mod mitigation;
pub mod report;

pub use chart::{render_chart, ChartSpec, ClassHistogram, HISTOGRAM_BINS};
pub use export::{export_json, parse_export, FeatureExport, SummaryExport, SCHEMA_VERSION};
pub use mitigation::{suggest_mitigations, Mitigation, MitigationKind, Trigger};
pub use report::{compose_report, compose_report_with, validation_line, RankedFeature, Report};
