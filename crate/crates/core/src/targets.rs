//! IoU matching of predictions to ground truth and the four reasoning-target
//! vectors built from it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize_own, Polygon};
use crate::ingest::{DefectDataset, GroundTruthDefect, PredictedDefect};

/// Rasterised intersection-over-union in `[0, 1]`.
///
/// When neither polygon covers a pixel centre the result is 1 for identical
/// polygons and 0 otherwise.
pub fn polygon_iou(a: &Polygon, b: &Polygon) -> f64 {
    let ma = rasterize_own(a);
    let mb = rasterize_own(b);
    let inter = ma.intersection_count(&mb);
    let union = ma.count() + mb.count() - inter;
    if union == 0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    inter as f64 / union as f64
}

/// IoU acceptance threshold in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct IouThreshold(f64);

impl IouThreshold {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(IouThreshold(value))
        } else {
            Err(Error::Precondition(format!(
                "IoU threshold {value} outside (0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for IouThreshold {
    fn default() -> Self {
        IouThreshold(0.5)
    }
}

impl TryFrom<f64> for IouThreshold {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        IouThreshold::new(v)
    }
}

impl From<IouThreshold> for f64 {
    fn from(t: IouThreshold) -> f64 {
        t.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchPair {
    pub truth: usize,
    pub prediction: usize,
    pub iou: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    pub pairs: Vec<MatchPair>,
    pub unmatched_true: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl Matching {
    pub fn prediction_for(&self, truth: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|p| p.truth == truth)
            .map(|p| p.prediction)
    }
}

/// Greedy one-to-one assignment over an IoU matrix indexed `[truth][prediction]`.
///
/// Candidates at or above the threshold are taken in descending IoU order
/// (ties: lower truth index, then lower prediction index) while both sides
/// are still free.
pub fn match_iou_matrix(ious: &[Vec<f64>], n_predictions: usize, threshold: IouThreshold) -> Matching {
    let mut candidates: Vec<MatchPair> = Vec::new();
    for (i, row) in ious.iter().enumerate() {
        debug_assert_eq!(row.len(), n_predictions);
        for (j, &iou) in row.iter().enumerate() {
            if iou >= threshold.value() {
                candidates.push(MatchPair {
                    truth: i,
                    prediction: j,
                    iou,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.truth.cmp(&b.truth))
            .then(a.prediction.cmp(&b.prediction))
    });

    let mut truth_used = vec![false; ious.len()];
    let mut pred_used = vec![false; n_predictions];
    let mut pairs = Vec::new();
    for c in candidates {
        if !truth_used[c.truth] && !pred_used[c.prediction] {
            truth_used[c.truth] = true;
            pred_used[c.prediction] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|p| p.truth);
    Matching {
        pairs,
        unmatched_true: (0..ious.len()).filter(|&i| !truth_used[i]).collect(),
        unmatched_pred: (0..n_predictions).filter(|&j| !pred_used[j]).collect(),
    }
}

pub fn match_defects(
    truths: &[GroundTruthDefect],
    predictions: &[PredictedDefect],
    threshold: IouThreshold,
) -> Matching {
    let ious: Vec<Vec<f64>> = truths
        .iter()
        .map(|t| {
            predictions
                .iter()
                .map(|p| polygon_iou(&t.region, &p.region))
                .collect()
        })
        .collect();
    match_iou_matrix(&ious, predictions.len(), threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Classification,
    Joint,
}

impl Task {
    pub fn kinds(self) -> &'static [TargetKind] {
        match self {
            Task::Detection => &[TargetKind::C, TargetKind::D],
            Task::Classification => &[TargetKind::CPrime, TargetKind::DPrime],
            Task::Joint => &TargetKind::ALL,
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "detection" => Ok(Task::Detection),
            "classification" => Ok(Task::Classification),
            "joint" => Ok(Task::Joint),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

/// One of the four reasoning targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetKind {
    /// Detected.
    C,
    /// Undetected.
    D,
    /// Correctly classified.
    CPrime,
    /// Misclassified.
    DPrime,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [TargetKind::C, TargetKind::D, TargetKind::CPrime, TargetKind::DPrime];

    /// Display symbol: `C`, `D`, `C'`, `D'`.
    pub fn symbol(self) -> &'static str {
        match self {
            TargetKind::C => "C",
            TargetKind::D => "D",
            TargetKind::CPrime => "C'",
            TargetKind::DPrime => "D'",
        }
    }

    /// Filesystem-safe name.
    pub fn slug(self) -> &'static str {
        match self {
            TargetKind::C => "C",
            TargetKind::D => "D",
            TargetKind::CPrime => "C_prime",
            TargetKind::DPrime => "D_prime",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            TargetKind::C => "detected defects",
            TargetKind::D => "undetected defects",
            TargetKind::CPrime => "correctly classified defects",
            TargetKind::DPrime => "misclassified defects",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" | "c" => Ok(TargetKind::C),
            "D" | "d" => Ok(TargetKind::D),
            "C'" | "c'" | "C_prime" | "c_prime" | "Cp" => Ok(TargetKind::CPrime),
            "D'" | "d'" | "D_prime" | "d_prime" | "Dp" => Ok(TargetKind::DPrime),
            _ => Err(Error::Config(format!("unknown reasoning target `{s}`"))),
        }
    }
}

impl TryFrom<String> for TargetKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TargetKind> for String {
    fn from(t: TargetKind) -> String {
        t.symbol().to_string()
    }
}

/// Binary target vectors over the true defects. Vectors not defined for the
/// task are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReasoningTargets {
    pub task: Task,
    pub c: Option<Vec<bool>>,
    pub d: Option<Vec<bool>>,
    pub c_prime: Option<Vec<bool>>,
    pub d_prime: Option<Vec<bool>>,
}

impl ReasoningTargets {
    pub fn get(&self, kind: TargetKind) -> Option<&[bool]> {
        match kind {
            TargetKind::C => self.c.as_deref(),
            TargetKind::D => self.d.as_deref(),
            TargetKind::CPrime => self.c_prime.as_deref(),
            TargetKind::DPrime => self.d_prime.as_deref(),
        }
    }

    pub fn len(&self) -> usize {
        self.c
            .as_ref()
            .or(self.c_prime.as_ref())
            .map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenates per-image targets of the same task.
    pub fn concat(task: Task, parts: &[ReasoningTargets]) -> ReasoningTargets {
        let join = |f: fn(&ReasoningTargets) -> &Option<Vec<bool>>| -> Option<Vec<bool>> {
            let mut out = Vec::new();
            for p in parts {
                out.extend_from_slice(f(p).as_ref()?);
            }
            Some(out)
        };
        let defined = |k: TargetKind| task.kinds().contains(&k);
        ReasoningTargets {
            task,
            c: join(|t| &t.c).filter(|_| defined(TargetKind::C)),
            d: join(|t| &t.d).filter(|_| defined(TargetKind::D)),
            c_prime: join(|t| &t.c_prime).filter(|_| defined(TargetKind::CPrime)),
            d_prime: join(|t| &t.d_prime).filter(|_| defined(TargetKind::DPrime)),
        }
    }
}

fn detection_vectors(matching: &Matching, n_truths: usize) -> (Vec<bool>, Vec<bool>) {
    let mut c = vec![false; n_truths];
    for p in &matching.pairs {
        c[p.truth] = true;
    }
    let d = c.iter().map(|&x| !x).collect();
    (c, d)
}

pub fn detection_targets(matching: &Matching, n_truths: usize) -> ReasoningTargets {
    let (c, d) = detection_vectors(matching, n_truths);
    ReasoningTargets {
        task: Task::Detection,
        c: Some(c),
        d: Some(d),
        c_prime: None,
        d_prime: None,
    }
}

/// Classification of already-detected defects; requires `I = J` and a
/// matching that pairs every true defect.
pub fn classification_targets(
    matching: &Matching,
    truths: &[GroundTruthDefect],
    predictions: &[PredictedDefect],
) -> Result<ReasoningTargets> {
    if truths.len() != predictions.len() {
        return Err(Error::Precondition(format!(
            "classification needs as many predictions as true defects (I = {}, J = {})",
            truths.len(),
            predictions.len()
        )));
    }
    if matching.pairs.len() != truths.len() {
        return Err(Error::Precondition(format!(
            "classification needs a bijective matching ({} of {} true defects matched)",
            matching.pairs.len(),
            truths.len()
        )));
    }
    let mut c_prime = vec![false; truths.len()];
    for p in &matching.pairs {
        c_prime[p.truth] = predictions[p.prediction].label == truths[p.truth].label;
    }
    let d_prime = c_prime.iter().map(|&x| !x).collect();
    Ok(ReasoningTargets {
        task: Task::Classification,
        c: None,
        d: None,
        c_prime: Some(c_prime),
        d_prime: Some(d_prime),
    })
}

pub fn joint_targets(
    matching: &Matching,
    truths: &[GroundTruthDefect],
    predictions: &[PredictedDefect],
) -> ReasoningTargets {
    let (c, d) = detection_vectors(matching, truths.len());
    let mut c_prime = vec![false; truths.len()];
    let mut d_prime = vec![false; truths.len()];
    for p in &matching.pairs {
        let correct = predictions[p.prediction].label == truths[p.truth].label;
        c_prime[p.truth] = correct;
        d_prime[p.truth] = !correct;
    }
    ReasoningTargets {
        task: Task::Joint,
        c: Some(c),
        d: Some(d),
        c_prime: Some(c_prime),
        d_prime: Some(d_prime),
    }
}

/// Matches every image and concatenates the targets in dataset row order.
pub fn dataset_targets(
    dataset: &DefectDataset,
    task: Task,
    threshold: IouThreshold,
) -> Result<ReasoningTargets> {
    let parts = dataset
        .entries
        .iter()
        .map(|e| {
            let m = match_defects(&e.truths, &e.predictions, threshold);
            match task {
                Task::Detection => Ok(detection_targets(&m, e.truths.len())),
                Task::Classification => classification_targets(&m, &e.truths, &e.predictions)
                    .map_err(|err| Error::Precondition(format!("image `{}`: {err}", e.id))),
                Task::Joint => Ok(joint_targets(&m, &e.truths, &e.predictions)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReasoningTargets::concat(task, &parts))
}
