//! Explains the outputs of mask-based defect detection and classification
//! models.
//!
//! Predictions are matched to ground truth to form binary reasoning targets
//! (detected, undetected, correctly classified, misclassified). Each true
//! defect is described by 38 morphological characteristics extracted from the
//! image and its polygon. An ensemble of untrimmed decision trees is trained
//! on those characteristics, every split is scored, and the scores are
//! aggregated per characteristic into charts, a ranked report and mitigation
//! suggestions.

pub mod defchar;
pub mod error;
pub mod explain;
pub mod geometry;
pub mod ingest;
pub mod pipeline;
pub mod reasoner;
pub mod synth;
pub mod targets;

pub use error::{Error, Result};
