//! Planar geometry in the native image frame.
//!
//! All coordinates are pixels with the origin at the top-left corner of the
//! image; pixel `(i, j)` covers `[i, i+1] x [j, j+1]`. "Counter-clockwise"
//! means positive signed shoelace area in these coordinates.

mod hull;
mod raster;
mod rect;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hull::{convex_hull, convex_intersection_area};
pub use raster::{iou, rasterize, SpanMask};
pub use rect::{min_area_rect, min_area_rect_points, RotatedRect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub(crate) fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub(crate) fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub(crate) fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub(crate) fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub(crate) fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Twice the signed area of triangle `(a, b, c)`; positive when counter-clockwise.
pub(crate) fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

pub(crate) fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// A simple polygon with at least three vertices, stored counter-clockwise.
///
/// Serialized as a flat coordinate list `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates and canonicalizes to counter-clockwise order.
    ///
    /// Rejects fewer than three vertices, non-finite coordinates, equal
    /// consecutive vertices (including last/first), zero area and
    /// self-intersections.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::invalid(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite polygon vertex ({}, {})", p.x, p.y)));
        }
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::invalid(format!("duplicate consecutive vertex at index {i}")));
            }
        }
        let area = signed_area(&vertices);
        if area == 0.0 || !area.is_finite() {
            return Err(Error::invalid("polygon has zero area"));
        }
        if !is_simple(&vertices) {
            return Err(Error::invalid("polygon is self-intersecting"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::invalid("flat coordinate list has odd length"));
        }
        Self::new(coords.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Unsigned shoelace area in px².
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn aabb(&self) -> AxisAlignedBox {
        AxisAlignedBox::enclosing(&self.vertices).expect("valid polygon has positive extent")
    }

    /// True when every turn is left or straight.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            orient(self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]) >= 0.0
        })
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect(),
        }
    }

    /// Even-odd containment; points on the boundary count as inside.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if orient(a, b, p) == 0.0 && on_segment(a, b, p) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when every vertex lies in `[0, width] x [0, height]`.
    pub fn within_frame(&self, width: u32, height: u32) -> bool {
        let (w, h) = (f64::from(width), f64::from(height));
        self.vertices.iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= h)
    }
}

impl TryFrom<Vec<f64>> for Polygon {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Polygon::from_flat(&coords)
    }
}

impl From<Polygon> for Vec<f64> {
    fn from(p: Polygon) -> Self {
        p.to_flat()
    }
}

fn is_simple(v: &[Point2]) -> bool {
    let n = v.len();
    let bbox = |i: usize| {
        let (a, b) = (v[i], v[(i + 1) % n]);
        (a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y))
    };
    let boxes: Vec<_> = (0..n).map(bbox).collect();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // Adjacent edges may only share their common vertex.
        let c = v[(i + 2) % n];
        if orient(a, b, c) == 0.0 && (b.sub(a)).dot(c.sub(b)) < 0.0 {
            return false;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi.2 < bj.0 || bj.2 < bi.0 || bi.3 < bj.1 || bj.3 < bi.1 {
                continue;
            }
            if segments_intersect(a, b, v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisAlignedBox {
    /// Smallest box containing `points`; `None` if the extent is degenerate.
    pub fn enclosing(points: &[Point2]) -> Option<Self> {
        let first = points.first()?;
        let init = (first.x, first.y, first.x, first.y);
        let (x_min, y_min, x_max, y_max) = points.iter().fold(init, |(a, b, c, d), p| {
            (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y))
        });
        (x_min < x_max && y_min < y_max).then_some(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Unsigned polygon area; see [`Polygon::area`].
pub fn area(p: &Polygon) -> f64 {
    p.area()
}

/// Axis-aligned bounding box of the polygon's vertices.
pub fn aabb(p: &Polygon) -> AxisAlignedBox {
    p.aabb()
}
