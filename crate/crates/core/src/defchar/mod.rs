//! The 38 defect characteristics (DefChars) and the matrix built from them.
//!
//! Column order: 12 defect-area colour values, 12 background-area colour
//! values, 3 colour-complexity differences, 5 shape values, 4 shape-complexity
//! values, 2 meta values.

pub mod colour;
mod matrix;
pub mod shape;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use colour::{
    background_region, background_with_fallback, colour_complexity, colour_stats, rgb_to_hsv,
    total_variation, ColourStats, HsvHistogram, HsvPixel, HUE_LEVELS, SV_LEVELS,
};
pub use matrix::{build_matrix, minmax_scale, ColumnScale, DefCharMatrix, RawMatrix};
pub use shape::{
    interior_angles, meta_info, neighbour_distance, shape_complexity, shape_info, MetaInfo,
    NeighbourDistance, ShapeComplexity, ShapeInfo,
};

use crate::error::{Error, Result};
use crate::geometry::{rasterize, PixelMask, Polygon};
use crate::ingest::RasterImage;

pub const DEFCHAR_COUNT: usize = 38;

pub const DEFCHAR_NAMES: [&str; DEFCHAR_COUNT] = [
    "defect_avg_hue",
    "defect_mode_hue",
    "defect_unique_hue",
    "defect_hue_range",
    "defect_avg_saturation",
    "defect_mode_saturation",
    "defect_unique_saturation",
    "defect_saturation_range",
    "defect_avg_brightness",
    "defect_mode_brightness",
    "defect_unique_brightness",
    "defect_brightness_range",
    "background_avg_hue",
    "background_mode_hue",
    "background_unique_hue",
    "background_hue_range",
    "background_avg_saturation",
    "background_mode_saturation",
    "background_unique_saturation",
    "background_saturation_range",
    "background_avg_brightness",
    "background_mode_brightness",
    "background_unique_brightness",
    "background_brightness_range",
    "hue_difference",
    "saturation_difference",
    "brightness_difference",
    "number_of_edges",
    "coverage",
    "aspect_ratio",
    "avg_turning_angle",
    "mode_turning_angle",
    "edge_ratio",
    "followed_turns",
    "small_turns",
    "reversed_turns",
    "defect_size",
    "neighbour_distance",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DefCharGroup {
    DefectColour,
    BackgroundColour,
    ColourComplexity,
    Shape,
    ShapeComplexity,
    Meta,
}

impl DefCharGroup {
    pub fn of(column: usize) -> DefCharGroup {
        match column {
            0..=11 => DefCharGroup::DefectColour,
            12..=23 => DefCharGroup::BackgroundColour,
            24..=26 => DefCharGroup::ColourComplexity,
            27..=31 => DefCharGroup::Shape,
            32..=35 => DefCharGroup::ShapeComplexity,
            36..=37 => DefCharGroup::Meta,
            _ => panic!("DefChar column {column} out of range"),
        }
    }

    pub fn is_colour(self) -> bool {
        matches!(
            self,
            DefCharGroup::DefectColour | DefCharGroup::BackgroundColour | DefCharGroup::ColourComplexity
        )
    }

    pub fn is_shape(self) -> bool {
        matches!(self, DefCharGroup::Shape | DefCharGroup::ShapeComplexity)
    }
}

pub fn column_index(name: &str) -> Option<usize> {
    DEFCHAR_NAMES.iter().position(|&n| n == name)
}

/// Column subsets used when comparing characteristic families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combination {
    Color,
    Shape,
    Meta,
    ColorShape,
    All,
}

impl Combination {
    pub const ALL: [Combination; 5] = [
        Combination::Color,
        Combination::Shape,
        Combination::Meta,
        Combination::ColorShape,
        Combination::All,
    ];

    pub fn includes(self, group: DefCharGroup) -> bool {
        let (colour, shape, meta) = match self {
            Combination::Color => (true, false, false),
            Combination::Shape => (false, true, false),
            Combination::Meta => (false, false, true),
            Combination::ColorShape => (true, true, false),
            Combination::All => (true, true, true),
        };
        (colour && group.is_colour()) || (shape && group.is_shape()) || (meta && group == DefCharGroup::Meta)
    }

    pub fn columns(self) -> Vec<usize> {
        (0..DEFCHAR_COUNT)
            .filter(|&c| self.includes(DefCharGroup::of(c)))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Combination::Color => "color",
            Combination::Shape => "shape",
            Combination::Meta => "meta",
            Combination::ColorShape => "color-shape",
            Combination::All => "all",
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "color" | "colour" => Ok(Combination::Color),
            "shape" => Ok(Combination::Shape),
            "meta" => Ok(Combination::Meta),
            "color-shape" | "colour-shape" => Ok(Combination::ColorShape),
            "all" => Ok(Combination::All),
            _ => Err(Error::Config(format!("unknown combination `{s}`"))),
        }
    }
}

/// One row of the DefChar matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefCharVector(pub [f64; DEFCHAR_COUNT]);

impl DefCharVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        column_index(name).map(|i| self.0[i])
    }

    pub fn values(&self) -> &[f64; DEFCHAR_COUNT] {
        &self.0
    }
}

/// Pixels of `polygon` inside `image`. A polygon covering no pixel centre
/// falls back to the pixel holding its vertex centroid.
pub fn defect_mask(image: &RasterImage, polygon: &Polygon) -> PixelMask {
    let rect = polygon.bbox().pixel_cover().intersect(&image.rect());
    let mut mask = rasterize(polygon, rect);
    if mask.count() == 0 {
        let c = polygon.centroid_of_vertices();
        let col = (c.x.floor() as i64).clamp(0, i64::from(image.width()) - 1);
        let row = (c.y.floor() as i64).clamp(0, i64::from(image.height()) - 1);
        mask = PixelMask::empty(crate::geometry::PixelRect {
            x0: col,
            y0: row,
            x1: col + 1,
            y1: row + 1,
        });
        mask.set(col, row);
    }
    mask
}

/// Extracts the 38 characteristics of one defect. `others` are the remaining
/// ground-truth polygons of the same image.
pub fn extract_defchars(
    image: &RasterImage,
    polygon: &Polygon,
    others: &[&Polygon],
) -> Result<DefCharVector> {
    let mask = defect_mask(image, polygon);
    let defect_px: Vec<(i64, i64)> = mask.pixels().collect();
    let background_px = background_with_fallback(image, polygon, &mask)?;
    let defect_hist = HsvHistogram::from_pixels(&colour::hsv_at(image, &defect_px));
    let background_hist = HsvHistogram::from_pixels(&colour::hsv_at(image, &background_px));

    let defect_colour = colour::colour_stats_from_histogram(&defect_hist)?;
    let background_colour = colour::colour_stats_from_histogram(&background_hist)?;
    let (hue_diff, sat_diff, bri_diff) =
        colour::colour_complexity_from_histograms(&defect_hist, &background_hist)?;
    let shape = shape_info(polygon);
    let complexity = shape_complexity(polygon);
    let meta = meta_info(polygon, &mask, others);

    let mut v = [0.0; DEFCHAR_COUNT];
    v[..12].copy_from_slice(&defect_colour.to_array());
    v[12..24].copy_from_slice(&background_colour.to_array());
    v[24..27].copy_from_slice(&[hue_diff, sat_diff, bri_diff]);
    v[27..32].copy_from_slice(&[
        shape.number_of_edges as f64,
        shape.coverage,
        shape.aspect_ratio,
        f64::from(shape.avg_turning_angle),
        f64::from(shape.mode_turning_angle),
    ]);
    v[32..36].copy_from_slice(&[
        complexity.edge_ratio,
        complexity.followed_turns,
        complexity.small_turns,
        complexity.reversed_turns,
    ]);
    v[36] = meta.defect_size as f64;
    v[37] = f64::from(meta.neighbour_distance as u8);
    Ok(DefCharVector(v))
}
