//! Seeded synthetic defect datasets: images, annotations and predictions
//! whose detection outcome follows a chosen rule.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::defchar::defect_mask;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::ingest::{
    assemble_dataset, AnnotationFile, CategoryId, DefectDataset, GroundTruthDefect, ImageRecord,
    PredictedDefect, PredictionFile, RasterImage,
};

/// Which true defects receive a matching prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum DetectionRule {
    /// Each defect is missed independently with this probability.
    MissRate { rate: f64 },
    /// Defects with fewer than `threshold` pixels are missed, all others are
    /// detected. Sizes are drawn with a gap around the threshold.
    SizeBelow { threshold: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_images: usize,
    /// At most 4.
    pub defects_per_image: usize,
    pub width: u32,
    pub height: u32,
    pub categories: Vec<String>,
    pub detection: DetectionRule,
    /// Probability that a detected defect is given a wrong label.
    pub misclassification_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_images: 122,
            defects_per_image: 3,
            width: 256,
            height: 256,
            categories: vec!["crack".into(), "erosion".into(), "void".into()],
            detection: DetectionRule::MissRate { rate: 0.3 },
            misclassification_rate: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub images: Vec<(String, RasterImage)>,
    pub annotations: AnnotationFile,
    pub predictions: PredictionFile,
}

impl SynthDataset {
    pub fn assemble(&self) -> Result<DefectDataset> {
        assemble_dataset(self.images.clone(), self.annotations.clone(), self.predictions.clone())
    }

    /// Writes `images/<id>.png`, `annotations.json` and `predictions.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let images_dir = dir.join("images");
        fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
        for (record, (_, image)) in self.annotations.images.iter().zip(&self.images) {
            image.save_png(&images_dir.join(&record.file))?;
        }
        for (name, text) in [
            ("annotations.json", self.annotations.to_json()),
            ("predictions.json", self.predictions.to_json()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

// three colours per region keep unique-value counts saturated, so they
// carry no size information
const PALETTE: [[u8; 3]; 12] = [
    [200, 40, 40],
    [40, 160, 60],
    [50, 70, 190],
    [210, 180, 60],
    [120, 60, 150],
    [40, 170, 170],
    [230, 120, 30],
    [90, 90, 90],
    [160, 160, 150],
    [110, 70, 40],
    [220, 200, 190],
    [30, 40, 60],
];

fn pick_colours<R: Rng>(rng: &mut R, n: usize) -> Vec<[u8; 3]> {
    let mut idx: Vec<usize> = (0..PALETTE.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx[..n].iter().map(|&i| PALETTE[i]).collect()
}

fn target_area<R: Rng>(rng: &mut R, rule: DetectionRule) -> f64 {
    match rule {
        DetectionRule::MissRate { .. } => rng.random_range(150.0..2500.0),
        DetectionRule::SizeBelow { threshold } => {
            let s = threshold as f64;
            if rng.random_bool(0.5) {
                // dense just below the threshold, sparse gap above it
                s * (0.95 - 0.6 * rng.random::<f64>().powi(2))
            } else {
                s * rng.random_range(1.3..2.6)
            }
        }
    }
}

/// Star-shaped polygon of roughly `area` square pixels inside `cell`.
fn random_polygon<R: Rng>(rng: &mut R, area: f64, cell: (f64, f64, f64, f64)) -> Result<Polygon> {
    let n = rng.random_range(3..=9);
    let base = rng.random_range(0.0..TAU);
    let unit: Vec<Point> = (0..n)
        .map(|i| {
            let a = base + (i as f64 + rng.random_range(-0.3..0.3)) * TAU / n as f64;
            let r = rng.random_range(0.55..1.0);
            Point::new(r * a.cos(), r * a.sin() * rng.random_range(0.6..1.0))
        })
        .collect();
    let unit = Polygon::new(unit)?;
    let (x0, y0, x1, y1) = cell;
    let b = unit.bbox();
    let k = (area / unit.area())
        .sqrt()
        .min((x1 - x0) / b.width())
        .min((y1 - y0) / b.height());
    let (w, h) = (b.width() * k, b.height() * k);
    let ox = rng.random_range(x0..(x1 - w).max(x0 + 1e-3)) - b.min_x * k;
    let oy = rng.random_range(y0..(y1 - h).max(y0 + 1e-3)) - b.min_y * k;
    let round = |v: f64| (v * 100.0).round() / 100.0;
    Polygon::new(
        unit.vertices()
            .iter()
            .map(|p| Point::new(round(p.x * k + ox), round(p.y * k + oy)))
            .collect(),
    )
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    if !(1..=4).contains(&config.defects_per_image) {
        return Err(Error::Config("defects_per_image must be between 1 and 4".into()));
    }
    if config.categories.len() < 2 {
        return Err(Error::Config("at least two categories are needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (w, h) = (config.width, config.height);
    let (cw, ch) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let margin = 4.0;
    let n_cat = config.categories.len();

    let mut images = Vec::with_capacity(config.n_images);
    let mut ann_records = Vec::new();
    let mut pred_records = Vec::new();
    for i in 0..config.n_images {
        let id = format!("img{i:04}");
        let background = pick_colours(&mut rng, 3);
        let mut pixels = Vec::with_capacity(w as usize * h as usize);
        for _ in 0..w as usize * h as usize {
            pixels.push(background[rng.random_range(0..3)]);
        }
        let mut image = RasterImage::new(w, h, pixels)?;

        let mut cells = [0usize, 1, 2, 3];
        for c in 0..config.defects_per_image {
            let j = rng.random_range(c..4);
            cells.swap(c, j);
        }
        let mut truths = Vec::new();
        let mut preds = Vec::new();
        for &cell in &cells[..config.defects_per_image] {
            let (cx, cy) = ((cell % 2) as f64 * cw, (cell / 2) as f64 * ch);
            let area = target_area(&mut rng, config.detection);
            let region = random_polygon(
                &mut rng,
                area,
                (cx + margin, cy + margin, cx + cw - margin, cy + ch - margin),
            )?;
            let mask = defect_mask(&image, &region);
            let colours = pick_colours(&mut rng, 3);
            for (col, row) in mask.pixels() {
                image.set(col as u32, row as u32, colours[rng.random_range(0..3)]);
            }
            let label = rng.random_range(0..n_cat);
            let detected = match config.detection {
                DetectionRule::MissRate { rate } => !rng.random_bool(rate),
                DetectionRule::SizeBelow { threshold } => mask.count().max(1) >= threshold,
            };
            if detected {
                let wrong = rng.random_bool(config.misclassification_rate);
                let predicted = if wrong {
                    (label + rng.random_range(1..n_cat)) % n_cat
                } else {
                    label
                };
                preds.push(PredictedDefect {
                    region: region.clone(),
                    label: CategoryId(predicted),
                    confidence: Some((rng.random_range(50..100) as f64) / 100.0),
                });
            }
            truths.push(GroundTruthDefect {
                region,
                label: CategoryId(label),
            });
        }
        let file = format!("{id}.png");
        ann_records.push(ImageRecord {
            id: id.clone(),
            file: file.clone(),
            defects: truths,
        });
        pred_records.push(ImageRecord {
            id: id.clone(),
            file,
            defects: preds,
        });
        images.push((id, image));
    }
    Ok(SynthDataset {
        images,
        annotations: AnnotationFile {
            categories: config.categories.clone(),
            images: ann_records,
        },
        predictions: PredictionFile {
            categories: config.categories.clone(),
            images: pred_records,
        },
    })
}
