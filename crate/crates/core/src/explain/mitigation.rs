//! Data-preparation suggestions keyed by the characteristic group of the
//! top-ranked features.

use serde::{Deserialize, Serialize};

use crate::defchar::{column_index, DefCharGroup};
use crate::reasoner::{DefCharSummary, EffectiveRange};

pub const DEFAULT_MITIGATION_TOP_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationKind {
    ColourNormalisation,
    ShapeAugmentation,
    ScaleAugmentation,
    CropIsolation,
}

impl MitigationKind {
    pub fn id(self) -> &'static str {
        match self {
            MitigationKind::ColourNormalisation => "colour-normalisation",
            MitigationKind::ShapeAugmentation => "shape-augmentation",
            MitigationKind::ScaleAugmentation => "scale-augmentation",
            MitigationKind::CropIsolation => "crop-isolation",
        }
    }

    fn advice(self) -> &'static str {
        match self {
            MitigationKind::ColourNormalisation => {
                "Enhance the images by normalising defect colours so colour variation matters less. \
                 Greyscaling removes hue and saturation cues: it may reduce misclassified cases but can \
                 increase undetected ones."
            }
            MitigationKind::ShapeAugmentation => {
                "Add shape-preserving augmentation (rotation, flipping, mild elastic warps) and annotate \
                 with higher-resolution masks so outline detail is represented."
            }
            MitigationKind::ScaleAugmentation => {
                "Add scale augmentation or tile large images so defects of every size are well represented."
            }
            MitigationKind::CropIsolation => {
                "Train on crop windows that isolate individual defects so neighbouring defects are not merged."
            }
        }
    }

    pub fn for_feature(name: &str) -> Option<MitigationKind> {
        let column = column_index(name)?;
        let group = DefCharGroup::of(column);
        Some(if group.is_colour() {
            MitigationKind::ColourNormalisation
        } else if group.is_shape() {
            MitigationKind::ShapeAugmentation
        } else if name == "defect_size" {
            MitigationKind::ScaleAugmentation
        } else {
            MitigationKind::CropIsolation
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub feature: String,
    pub der: Option<EffectiveRange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mitigation {
    pub kind: MitigationKind,
    /// Top-ranked features that raised this suggestion, best first.
    pub triggers: Vec<Trigger>,
    pub text: String,
}

/// One suggestion per kind raised by the `k` best features by DOS, ordered
/// by the rank of each kind's first trigger. Unused features raise nothing.
pub fn suggest_mitigations(summary: &DefCharSummary, k: usize) -> Vec<Mitigation> {
    let mut out: Vec<Mitigation> = Vec::new();
    for f in summary.ranked().into_iter().take(k) {
        if f.node_count == 0 {
            continue;
        }
        let Some(kind) = MitigationKind::for_feature(&f.name) else {
            continue;
        };
        let trigger = Trigger {
            feature: f.name.clone(),
            der: f.der,
        };
        match out.iter_mut().find(|m| m.kind == kind) {
            Some(m) => m.triggers.push(trigger),
            None => out.push(Mitigation {
                kind,
                triggers: vec![trigger],
                text: String::new(),
            }),
        }
    }
    for m in &mut out {
        let cited: Vec<String> = m
            .triggers
            .iter()
            .map(|t| match &t.der {
                Some(d) => format!("{} in [{:.3}, {:.3}]", t.feature, d.lower, d.upper),
                None => t.feature.clone(),
            })
            .collect();
        m.text = format!("{} Triggered by {}.", m.kind.advice(), cited.join("; "));
    }
    out
}
