//! Shape, shape-complexity and meta characteristics of a defect polygon.

use crate::geometry::{PixelMask, Polygon};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeInfo {
    pub number_of_edges: usize,
    pub coverage: f64,
    pub aspect_ratio: f64,
    pub avg_turning_angle: u32,
    pub mode_turning_angle: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeComplexity {
    pub edge_ratio: f64,
    pub followed_turns: f64,
    pub small_turns: f64,
    pub reversed_turns: f64,
}

/// Angle in degrees between the two edges meeting at each vertex, in
/// `[0, 180]`. For convex vertices this is the interior angle; reflex
/// vertices map to `360 - interior`.
pub fn interior_angles(polygon: &Polygon) -> Vec<f64> {
    let v = polygon.vertices();
    let n = v.len();
    (0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n].sub(v[i]);
            let next = v[(i + 1) % n].sub(v[i]);
            prev.cross(next).abs().atan2(prev.dot(next)).to_degrees()
        })
        .collect()
}

/// Interior angles rounded to whole degrees within `1..=180`.
pub fn turning_angles(polygon: &Polygon) -> Vec<u32> {
    interior_angles(polygon)
        .into_iter()
        .map(|a| (a.round() as u32).clamp(1, 180))
        .collect()
}

pub fn shape_info(polygon: &Polygon) -> ShapeInfo {
    let bbox = polygon.bbox();
    let (w, h) = (bbox.width(), bbox.height());
    let angles = turning_angles(polygon);
    let n = angles.len() as u32;
    let sum: u32 = angles.iter().sum();
    let mut counts = [0u32; 181];
    for &a in &angles {
        counts[a as usize] += 1;
    }
    let mut mode = 1;
    for a in 1..=180 {
        if counts[a] > counts[mode] {
            mode = a;
        }
    }
    ShapeInfo {
        number_of_edges: polygon.len(),
        coverage: polygon.area() / bbox.area(),
        aspect_ratio: w.min(h) / w.max(h),
        avg_turning_angle: (2 * sum + n) / (2 * n),
        mode_turning_angle: mode as u32,
    }
}

/// Sign of the turn at each vertex: `1` left, `-1` right, `0` collinear.
pub fn turn_signs(polygon: &Polygon) -> Vec<i8> {
    let v = polygon.vertices();
    let n = v.len();
    (0..n)
        .map(|i| {
            let incoming = v[i].sub(v[(i + n - 1) % n]);
            let outgoing = v[(i + 1) % n].sub(v[i]);
            let c = incoming.cross(outgoing);
            if c > 0.0 {
                1
            } else if c < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

pub fn shape_complexity(polygon: &Polygon) -> ShapeComplexity {
    let v = polygon.vertices();
    let n = v.len();
    let lengths: Vec<f64> = polygon.edges().map(|(a, b)| a.distance(b)).collect();
    let edge_ratio = (0..n)
        .map(|i| {
            let (a, b) = (lengths[(i + n - 1) % n], lengths[i]);
            a.min(b) / a.max(b)
        })
        .sum::<f64>()
        / n as f64;

    let signs = turn_signs(polygon);
    let (mut followed, mut reversed) = (0usize, 0usize);
    for i in 0..n {
        let (a, b) = (signs[i], signs[(i + 1) % n]);
        if a != 0 && b != 0 {
            if a == b {
                followed += 1;
            } else {
                reversed += 1;
            }
        }
    }
    let small = turning_angles(polygon).iter().filter(|&&a| a < 90).count();
    ShapeComplexity {
        edge_ratio,
        followed_turns: followed as f64 / n as f64,
        small_turns: small as f64 / n as f64,
        reversed_turns: reversed as f64 / n as f64,
    }
}

/// Distance to the nearest neighbouring defect, bucketed at 100 px.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighbourDistance {
    Short = 0,
    Long = 1,
    NoNeighbour = 2,
}

pub const NEIGHBOUR_CUTOFF_PX: f64 = 100.0;

pub fn neighbour_distance(polygon: &Polygon, others: &[&Polygon]) -> NeighbourDistance {
    let nearest = others
        .iter()
        .flat_map(|o| o.vertices())
        .flat_map(|q| polygon.vertices().iter().map(move |p| p.distance(*q)))
        .fold(f64::INFINITY, f64::min);
    if others.is_empty() {
        NeighbourDistance::NoNeighbour
    } else if nearest <= NEIGHBOUR_CUTOFF_PX {
        NeighbourDistance::Short
    } else {
        NeighbourDistance::Long
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetaInfo {
    pub defect_size: usize,
    pub neighbour_distance: NeighbourDistance,
}

/// `defect` is the polygon's rasterised mask; a polygon covering no pixel
/// centre counts as one pixel.
pub fn meta_info(polygon: &Polygon, defect: &PixelMask, others: &[&Polygon]) -> MetaInfo {
    MetaInfo {
        defect_size: defect.count().max(1),
        neighbour_distance: neighbour_distance(polygon, others),
    }
}
