//! Native/working frame transforms. Axes scale independently: 1500/5456 and
//! 998/3632 are not the same factor, and no letterboxing is assumed.

use super::model::{ImageRecord, Resolution};
use crate::error::{Error, Result};
use crate::geometry::Point2;

fn check_within(p: Point2, r: Resolution, frame: &str) -> Result<()> {
    let inside = p.is_finite()
        && p.x >= 0.0
        && p.y >= 0.0
        && p.x <= f64::from(r.width())
        && p.y <= f64::from(r.height());
    if inside {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "point ({}, {}) outside the {frame} frame {}x{}",
            p.x,
            p.y,
            r.width(),
            r.height()
        )))
    }
}

fn scale(p: Point2, from: Resolution, to: Resolution) -> Point2 {
    Point2::new(
        p.x * f64::from(to.width()) / f64::from(from.width()),
        p.y * f64::from(to.height()) / f64::from(from.height()),
    )
}

/// Working-frame point to native frame.
pub fn to_native(p: Point2, img: &ImageRecord) -> Result<Point2> {
    check_within(p, img.working_resolution, "working")?;
    Ok(scale(p, img.working_resolution, img.native_resolution))
}

/// Native-frame point to working frame.
pub fn to_working(p: Point2, img: &ImageRecord) -> Result<Point2> {
    check_within(p, img.native_resolution, "native")?;
    Ok(scale(p, img.native_resolution, img.working_resolution))
}
