use serde::{Deserialize, Serialize};

use super::{convex_hull, orient, signed_area, Point2, Polygon};
use crate::error::{Error, Result};

const RECT_TOL: f64 = 1e-9;

/// A rectangle with arbitrary orientation, stored as four counter-clockwise
/// corners. Corner 0 to corner 1 is the "width" side; its direction angle is
/// normalized into `[0, 90)` degrees.
///
/// Serialized as a flat list of the eight corner coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RotatedRect {
    corners: [Point2; 4],
}

impl RotatedRect {
    pub fn from_corners(corners: [Point2; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite rectangle corner"));
        }
        let mut c = corners;
        if signed_area(&c) < 0.0 {
            c.reverse();
        }
        let side = |i: usize| c[(i + 1) % 4].sub(c[i]);
        let scale = side(0).norm().max(side(1).norm());
        if scale == 0.0 || signed_area(&c) <= 0.0 {
            return Err(Error::invalid("rectangle has zero area"));
        }
        let tol = RECT_TOL * scale;
        let opposite_ok = |i: usize| {
            let (s, t) = (side(i), side(i + 2));
            (s.x + t.x).abs() <= tol && (s.y + t.y).abs() <= tol
        };
        let right_angle = side(0).dot(side(1)).abs() <= RECT_TOL * scale * scale;
        if !(opposite_ok(0) && opposite_ok(1) && right_angle) {
            return Err(Error::invalid("corners do not form a rectangle"));
        }
        Ok(Self::canonical(c))
    }

    /// Rotates the corner order so that the first side points into `[0, 90)` degrees.
    fn canonical(c: [Point2; 4]) -> Self {
        let start = (0..4)
            .min_by(|&a, &b| side_angle(c, a).total_cmp(&side_angle(c, b)))
            .expect("four sides");
        Self { corners: std::array::from_fn(|k| c[(start + k) % 4]) }
    }

    pub fn corners(&self) -> [Point2; 4] {
        self.corners
    }

    pub fn center(&self) -> Point2 {
        let c = self.corners;
        Point2::new(
            (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0,
            (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.corners[1].sub(self.corners[0]).norm()
    }

    pub fn height(&self) -> f64 {
        self.corners[3].sub(self.corners[0]).norm()
    }

    /// Direction of the width side in degrees, in `[0, 90)`.
    pub fn angle(&self) -> f64 {
        side_angle(self.corners, 0)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    /// True when `p` is inside or within `tol` pixels outside of every side.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        (0..4).all(|i| {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            orient(a, b, p) / b.sub(a).norm() >= -tol
        })
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::new(self.corners.to_vec()).expect("rectangle corners form a valid polygon")
    }
}

fn side_angle(c: [Point2; 4], i: usize) -> f64 {
    let d = c[(i + 1) % 4].sub(c[i]);
    let mut deg = d.y.atan2(d.x).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    if deg >= 360.0 - 1e-9 {
        deg = 0.0;
    }
    deg
}

impl TryFrom<Vec<f64>> for RotatedRect {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        if v.len() != 8 {
            return Err(Error::invalid(format!("rectangle needs 8 coordinates, got {}", v.len())));
        }
        RotatedRect::from_corners(std::array::from_fn(|k| Point2::new(v[2 * k], v[2 * k + 1])))
    }
}

impl From<RotatedRect> for Vec<f64> {
    fn from(r: RotatedRect) -> Self {
        r.corners.iter().flat_map(|p| [p.x, p.y]).collect()
    }
}

/// Minimum-area enclosing rectangle of a polygon (rotating calipers over its hull).
pub fn min_area_rect(p: &Polygon) -> RotatedRect {
    let hull = convex_hull(p.vertices()).expect("a polygon with positive area has a 2D hull");
    calipers(hull.vertices())
}

/// Minimum-area enclosing rectangle of a point set.
pub fn min_area_rect_points(points: &[Point2]) -> Result<RotatedRect> {
    let hull = convex_hull(points)?;
    Ok(calipers(hull.vertices()))
}

/// One side of the optimal rectangle is collinear with a hull edge, so it is
/// enough to try every edge direction.
fn calipers(hull: &[Point2]) -> RotatedRect {
    let n = hull.len();
    let mut best: Option<(f64, [Point2; 4])> = None;
    for i in 0..n {
        let e = hull[(i + 1) % n].sub(hull[i]);
        let u = e.scale(1.0 / e.norm());
        let v = Point2::new(-u.y, u.x);
        let (mut s0, mut s1, mut t0, mut t1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &p in hull {
            let s = p.dot(u);
            let t = p.dot(v);
            s0 = s0.min(s);
            s1 = s1.max(s);
            t0 = t0.min(t);
            t1 = t1.max(t);
        }
        let area = (s1 - s0) * (t1 - t0);
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let at = |s: f64, t: f64| u.scale(s).add(v.scale(t));
            best = Some((area, [at(s0, t0), at(s1, t0), at(s1, t1), at(s0, t1)]));
        }
    }
    let (_, corners) = best.expect("hull has edges");
    RotatedRect::canonical(corners)
}
