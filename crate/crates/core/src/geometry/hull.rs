use super::{orient, signed_area, Point2, Polygon};
use crate::error::{Error, Result};

/// Convex hull by Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Result<Polygon> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("non-finite point in hull input"));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::invalid("degenerate input: fewer than 3 distinct points, no 2D hull"));
    }

    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 || signed_area(&lower) <= 0.0 {
        return Err(Error::invalid("degenerate input: all points collinear, no 2D hull"));
    }
    Polygon::new(lower)
}

/// Exact area of the intersection of two convex polygons (Sutherland–Hodgman).
pub fn convex_intersection_area(a: &Polygon, b: &Polygon) -> Result<f64> {
    if !a.is_convex() || !b.is_convex() {
        return Err(Error::invalid("convex_intersection_area requires convex polygons"));
    }
    let clip = b.vertices();
    let mut output: Vec<Point2> = a.vertices().to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let d_cur = orient(c0, c1, cur);
            let d_prev = orient(c0, c1, prev);
            if d_cur >= 0.0 {
                if d_prev < 0.0 {
                    output.push(intersect(prev, cur, d_prev, d_cur));
                }
                output.push(cur);
            } else if d_prev >= 0.0 {
                output.push(intersect(prev, cur, d_prev, d_cur));
            }
        }
    }
    if output.len() < 3 {
        return Ok(0.0);
    }
    Ok(signed_area(&output).max(0.0))
}

fn intersect(p: Point2, q: Point2, dp: f64, dq: f64) -> Point2 {
    let t = dp / (dp - dq);
    p.add(q.sub(p).scale(t))
}
