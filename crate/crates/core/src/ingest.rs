//! Image decoding and the annotation/prediction JSON format.
//!
//! Both files share one shape:
//!
//! ```json
//! {"categories": ["crack", "erosion"],
//!  "images": [{"id": "img-001", "file": "img-001.png",
//!              "defects": [{"polygon": [[x, y], ...], "label": "crack", "confidence": 0.97}]}]}
//! ```
//!
//! `confidence` is accepted in prediction files only.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize, PixelRect, Point, Polygon};

/// Decoded RGB image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Precondition("image dimensions must be at least 1x1".into()));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Precondition(format!(
                "pixel grid has {} entries, expected {}",
                pixels.len(),
                width as usize * height as usize
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        RasterImage::new(width, height, vec![rgb; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rect(&self) -> PixelRect {
        PixelRect::image(self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// Pixel at `(col, row)`; panics when out of bounds.
    pub fn get(&self, col: u32, row: u32) -> [u8; 3] {
        self.pixels[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, col: u32, row: u32, rgb: [u8; 3]) {
        let w = self.width as usize;
        self.pixels[row as usize * w + col as usize] = rgb;
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf = image::RgbImage::from_raw(self.width, self.height, flat)
            .expect("pixel buffer matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

/// Decodes a PNG or JPEG file. Alpha is dropped and greyscale is expanded to RGB.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Image { message, .. } => Error::Image {
            path: path.to_path_buf(),
            message,
        },
        Error::EmptyImage(_) => Error::EmptyImage(path.to_path_buf()),
        other => other,
    })
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let image_err = |message: String| Error::Image {
        path: Default::default(),
        message,
    };
    let format = image::guess_format(bytes).map_err(|e| image_err(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(image_err(format!("unsupported format {format:?}")));
    }
    let decoded =
        image::load_from_memory_with_format(bytes, format).map_err(|e| image_err(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (width, height) = rgb.dimensions();
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage(Default::default()));
    }
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RasterImage::new(width, height, pixels)
}

/// Index into the dataset's category list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoryId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthDefect {
    pub region: Polygon,
    pub label: CategoryId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictedDefect {
    pub region: Polygon,
    pub label: CategoryId,
    pub confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord<D> {
    pub id: String,
    pub file: String,
    pub defects: Vec<D>,
}

/// A parsed annotation or prediction file.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelFile<D> {
    pub categories: Vec<String>,
    pub images: Vec<ImageRecord<D>>,
}

pub type AnnotationFile = LabelFile<GroundTruthDefect>;
pub type PredictionFile = LabelFile<PredictedDefect>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchema {
    categories: Vec<String>,
    images: Vec<ImageSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageSchema {
    id: String,
    file: String,
    #[serde(default)]
    defects: Vec<DefectSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefectSchema {
    polygon: Vec<[f64; 2]>,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

trait DefectRecord: Sized {
    fn from_schema(region: Polygon, label: CategoryId, confidence: Option<f64>) -> Result<Self>;
    fn to_schema(&self, categories: &[String]) -> DefectSchema;
}

impl DefectRecord for GroundTruthDefect {
    fn from_schema(region: Polygon, label: CategoryId, confidence: Option<f64>) -> Result<Self> {
        if confidence.is_some() {
            return Err(Error::Schema(
                "`confidence` is only valid in prediction files".into(),
            ));
        }
        Ok(GroundTruthDefect { region, label })
    }

    fn to_schema(&self, categories: &[String]) -> DefectSchema {
        DefectSchema {
            polygon: polygon_to_schema(&self.region),
            label: categories[self.label.0].clone(),
            confidence: None,
        }
    }
}

impl DefectRecord for PredictedDefect {
    fn from_schema(region: Polygon, label: CategoryId, confidence: Option<f64>) -> Result<Self> {
        if let Some(c) = confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::ConfidenceOutOfRange(c));
            }
        }
        Ok(PredictedDefect {
            region,
            label,
            confidence,
        })
    }

    fn to_schema(&self, categories: &[String]) -> DefectSchema {
        DefectSchema {
            polygon: polygon_to_schema(&self.region),
            label: categories[self.label.0].clone(),
            confidence: self.confidence,
        }
    }
}

fn polygon_to_schema(p: &Polygon) -> Vec<[f64; 2]> {
    p.vertices().iter().map(|v| [v.x, v.y]).collect()
}

fn parse_label_file<D: DefectRecord>(text: &str) -> Result<LabelFile<D>> {
    let schema: FileSchema =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in schema.categories.iter().enumerate() {
        if index.insert(name.as_str(), i).is_some() {
            return Err(Error::Schema(format!("duplicate category `{name}`")));
        }
    }
    let mut seen = HashSet::new();
    let mut images = Vec::with_capacity(schema.images.len());
    for img in &schema.images {
        if !seen.insert(img.id.as_str()) {
            return Err(Error::Schema(format!("duplicate image id `{}`", img.id)));
        }
        let mut defects = Vec::with_capacity(img.defects.len());
        for d in &img.defects {
            let label = *index
                .get(d.label.as_str())
                .ok_or_else(|| Error::UnknownCategory(d.label.clone()))?;
            let region = Polygon::new(d.polygon.iter().map(|&[x, y]| Point::new(x, y)).collect())?;
            defects.push(D::from_schema(region, CategoryId(label), d.confidence)?);
        }
        images.push(ImageRecord {
            id: img.id.clone(),
            file: img.file.clone(),
            defects,
        });
    }
    Ok(LabelFile {
        categories: schema.categories,
        images,
    })
}

#[allow(private_bounds)]
impl<D: DefectRecord> LabelFile<D> {
    pub fn to_json(&self) -> String {
        let schema = FileSchema {
            categories: self.categories.clone(),
            images: self
                .images
                .iter()
                .map(|img| ImageSchema {
                    id: img.id.clone(),
                    file: img.file.clone(),
                    defects: img
                        .defects
                        .iter()
                        .map(|d| d.to_schema(&self.categories))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&schema).expect("schema serialises")
    }
}

pub fn parse_annotations_str(text: &str) -> Result<AnnotationFile> {
    parse_label_file(text)
}

pub fn parse_predictions_str(text: &str) -> Result<PredictionFile> {
    parse_label_file(text)
}

pub fn parse_annotations(path: &Path) -> Result<AnnotationFile> {
    parse_annotations_str(&read_text(path)?)
}

pub fn parse_predictions(path: &Path) -> Result<PredictionFile> {
    parse_predictions_str(&read_text(path)?)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub id: String,
    pub image: RasterImage,
    pub truths: Vec<GroundTruthDefect>,
    pub predictions: Vec<PredictedDefect>,
}

/// Images with their ground truth and predictions, validated against each other.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectDataset {
    pub categories: Vec<String>,
    pub entries: Vec<DatasetEntry>,
}

impl DefectDataset {
    /// Total number of ground-truth defects.
    pub fn defect_count(&self) -> usize {
        self.entries.iter().map(|e| e.truths.len()).sum()
    }

    /// `<image id>:<defect index>` for every ground-truth defect, in row order.
    pub fn defect_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(|e| (0..e.truths.len()).map(move |i| format!("{}:{}", e.id, i)))
            .collect()
    }
}

/// Joins decoded images, annotations and predictions on image id.
///
/// Prediction labels are remapped onto the annotation category list. Images
/// absent from the prediction file get no predictions. Polygons are clamped
/// to their image, and ground-truth regions sharing any rasterised pixel are
/// rejected.
pub fn assemble_dataset(
    images: Vec<(String, RasterImage)>,
    annotations: AnnotationFile,
    predictions: PredictionFile,
) -> Result<DefectDataset> {
    let mut image_map: HashMap<String, RasterImage> = images.into_iter().collect();
    let ann_ids: HashSet<&str> = annotations.images.iter().map(|i| i.id.as_str()).collect();
    for p in &predictions.images {
        if !ann_ids.contains(p.id.as_str()) {
            return Err(Error::UnknownImage(p.id.clone()));
        }
    }

    let cat_index: HashMap<&str, usize> = annotations
        .categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut remap = Vec::with_capacity(predictions.categories.len());
    for name in &predictions.categories {
        remap.push(cat_index.get(name.as_str()).copied());
    }

    let mut pred_by_image: HashMap<String, Vec<PredictedDefect>> = HashMap::new();
    for img in predictions.images {
        let mut defects = Vec::with_capacity(img.defects.len());
        for d in img.defects {
            let label = remap[d.label.0]
                .ok_or_else(|| Error::UnknownCategory(predictions.categories[d.label.0].clone()))?;
            defects.push(PredictedDefect {
                label: CategoryId(label),
                ..d
            });
        }
        pred_by_image.insert(img.id, defects);
    }

    let mut entries = Vec::with_capacity(annotations.images.len());
    for record in annotations.images {
        let image = image_map
            .remove(&record.id)
            .ok_or_else(|| Error::UnknownImage(record.id.clone()))?;
        let (w, h) = (image.width(), image.height());
        let truths = record
            .defects
            .into_iter()
            .map(|d| {
                Ok(GroundTruthDefect {
                    region: d.region.clamped(w, h)?,
                    label: d.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let predictions = pred_by_image
            .remove(&record.id)
            .unwrap_or_default()
            .into_iter()
            .map(|d| {
                Ok(PredictedDefect {
                    region: d.region.clamped(w, h)?,
                    ..d
                })
            })
            .collect::<Result<Vec<_>>>()?;
        check_disjoint(&record.id, &image, &truths)?;
        entries.push(DatasetEntry {
            id: record.id,
            image,
            truths,
            predictions,
        });
    }
    Ok(DefectDataset {
        categories: annotations.categories,
        entries,
    })
}

fn check_disjoint(id: &str, image: &RasterImage, truths: &[GroundTruthDefect]) -> Result<()> {
    let rect = image.rect();
    let masks: Vec<_> = truths
        .iter()
        .map(|t| rasterize(&t.region, t.region.bbox().pixel_cover().intersect(&rect)))
        .collect();
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            let pixels = masks[i].intersection_count(&masks[j]);
            if pixels > 0 {
                return Err(Error::OverlappingDefects {
                    image: id.to_string(),
                    first: i,
                    second: j,
                    pixels,
                });
            }
        }
    }
    Ok(())
}

/// Reads the annotation and prediction files and decodes every referenced
/// image from `images_dir`.
pub fn load_dataset(
    images_dir: &Path,
    annotations_path: &Path,
    predictions_path: &Path,
) -> Result<DefectDataset> {
    let annotations = parse_annotations(annotations_path)?;
    let predictions = parse_predictions(predictions_path)?;
    let images = annotations
        .images
        .iter()
        .map(|r| Ok((r.id.clone(), load_image(&images_dir.join(&r.file))?)))
        .collect::<Result<Vec<_>>>()?;
    assemble_dataset(images, annotations, predictions)
}
