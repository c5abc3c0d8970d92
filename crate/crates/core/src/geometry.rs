//! Polygon primitives and pixel-centre rasterisation.
//!
//! Pixel `(col, row)` covers `[col, col + 1) x [row, row + 1)` and is inside a
//! polygon when its centre `(col + 0.5, row + 0.5)` is inside under the
//! even-odd rule. Every pixel-based measure in the crate (IoU, defect size,
//! colour sampling, overlap checks) goes through [`rasterize`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).norm()
    }
}

/// Axis-aligned box in continuous coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Smallest pixel rectangle whose cells cover this box.
    pub fn pixel_cover(&self) -> PixelRect {
        PixelRect {
            x0: self.min_x.floor() as i64,
            y0: self.min_y.floor() as i64,
            x1: self.max_x.ceil() as i64,
            y1: self.max_y.ceil() as i64,
        }
    }
}

/// A simple polygon with at least three distinct vertices, non-zero area and
/// counter-clockwise orientation (positive shoelace area).
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates and normalises a vertex list: consecutive duplicates (including
    /// a repeated closing vertex) are merged and clockwise input is reversed.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegeneratePolygon(format!(
                "non-finite vertex ({}, {})",
                p.x, p.y
            )));
        }
        let mut merged: Vec<Point> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if merged.last() != Some(&p) {
                merged.push(p);
            }
        }
        while merged.len() > 1 && merged.first() == merged.last() {
            merged.pop();
        }
        if merged.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "{} distinct vertices, need at least 3",
                merged.len()
            )));
        }
        let area = shoelace(&merged);
        if area == 0.0 {
            return Err(Error::DegeneratePolygon("zero enclosed area".into()));
        }
        if area < 0.0 {
            merged.reverse();
        }
        Ok(Polygon { vertices: merged })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Polygon::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Signed shoelace area; always positive for a constructed polygon.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut b = BoundingBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in &self.vertices {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    pub fn centroid_of_vertices(&self) -> Point {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }

    /// Clamps every vertex into `[0, width] x [0, height]` and re-validates.
    pub fn clamped(&self, width: u32, height: u32) -> Result<Polygon> {
        let (w, h) = (f64::from(width), f64::from(height));
        Polygon::new(
            self.vertices
                .iter()
                .map(|p| Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h)))
                .collect(),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    /// Edges as `(start, end)` pairs, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

fn shoelace(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice / 2.0
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn image(width: u32, height: u32) -> Self {
        PixelRect {
            x0: 0,
            y0: 0,
            x1: i64::from(width),
            y1: i64::from(height),
        }
    }

    pub fn width(&self) -> usize {
        (self.x1 - self.x0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn union(&self, other: &PixelRect) -> PixelRect {
        PixelRect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        PixelRect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        }
    }

    pub fn contains(&self, col: i64, row: i64) -> bool {
        col >= self.x0 && col < self.x1 && row >= self.y0 && row < self.y1
    }
}

/// Boolean pixel mask over a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelMask {
    rect: PixelRect,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(rect: PixelRect) -> Self {
        PixelMask {
            rect,
            bits: vec![false; rect.width() * rect.height()],
        }
    }

    pub fn rect(&self) -> PixelRect {
        self.rect
    }

    pub fn get(&self, col: i64, row: i64) -> bool {
        if !self.rect.contains(col, row) {
            return false;
        }
        self.bits[self.offset(col, row)]
    }

    pub fn set(&mut self, col: i64, row: i64) {
        if self.rect.contains(col, row) {
            let i = self.offset(col, row);
            self.bits[i] = true;
        }
    }

    fn offset(&self, col: i64, row: i64) -> usize {
        (row - self.rect.y0) as usize * self.rect.width() + (col - self.rect.x0) as usize
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = self.rect.width();
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| {
            (
                self.rect.x0 + (i % w) as i64,
                self.rect.y0 + (i / w) as i64,
            )
        })
    }

    pub fn intersection_count(&self, other: &PixelMask) -> usize {
        let r = self.rect.intersect(&other.rect);
        if r.is_empty() {
            return 0;
        }
        let mut n = 0;
        for row in r.y0..r.y1 {
            for col in r.x0..r.x1 {
                if self.get(col, row) && other.get(col, row) {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Rasterises `polygon` into the pixels of `rect` by scanline, even-odd rule
/// on pixel centres.
pub fn rasterize(polygon: &Polygon, rect: PixelRect) -> PixelMask {
    let mut mask = PixelMask::empty(rect);
    if rect.is_empty() {
        return mask;
    }
    let vs = polygon.vertices();
    let n = vs.len();
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for row in rect.y0..rect.y1 {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let a = vs[i];
            let b = vs[(i + n - 1) % n];
            if (a.y > yc) != (b.y > yc) {
                crossings.push((b.x - a.x) * (yc - a.y) / (b.y - a.y) + a.x);
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // centre x in [span[0], span[1]); the ceil estimate is corrected
            // with the exact comparison so the span edges never disagree with
            // a per-pixel crossing test
            let centre = |c: i64| c as f64 + 0.5;
            let mut col = ((span[0] - 0.5).ceil() as i64).clamp(rect.x0, rect.x1);
            while col > rect.x0 && centre(col - 1) >= span[0] {
                col -= 1;
            }
            while col < rect.x1 && centre(col) < span[0] {
                col += 1;
            }
            while col < rect.x1 && centre(col) < span[1] {
                mask.set(col, row);
                col += 1;
            }
        }
    }
    mask
}

/// Rasterises a polygon over the pixels of its own bounding box.
pub fn rasterize_own(polygon: &Polygon) -> PixelMask {
    rasterize(polygon, polygon.bbox().pixel_cover())
}
