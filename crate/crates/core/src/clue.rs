//! Clues: minimum-area rotated rectangles around predicted instance masks,
//! shown to analysts as suggestions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{min_area_rect_points, Point2, RotatedRect, SpanMask};
use crate::mask::RleMask;
use crate::store::frame::to_native;
use crate::store::model::{Frame, ImageRecord, PredictionEntry};

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;

/// Slack allowed when auditing that a clue encloses its mask.
pub const CONTAINMENT_TOLERANCE_PX: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInstance {
    pub id: String,
    pub image_id: String,
    pub mask: RleMask,
    pub score: f64,
    /// Frame the mask was received in; clues are always emitted in native pixels.
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClueStatus {
    Proposed,
    Converted,
    Modified,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clue {
    pub id: String,
    pub image_id: String,
    #[serde(rename = "corners")]
    pub rect: RotatedRect,
    pub score: f64,
    pub source_instance: String,
    pub status: ClueStatus,
}

pub trait ImageLookup {
    fn image(&self, image_id: &str) -> Option<&ImageRecord>;
}

impl ImageLookup for BTreeMap<String, ImageRecord> {
    fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.get(image_id)
    }
}

impl ImageLookup for [ImageRecord] {
    fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.iter().find(|r| r.image_id == image_id)
    }
}

impl ImageLookup for ImageRecord {
    fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        (self.image_id == image_id).then_some(self)
    }
}

pub fn clue_id_for(instance_id: &str) -> String {
    format!("clue-{instance_id}")
}

/// Validates one prediction-file entry against its image and converts
/// polygon predictions to masks in the declared frame.
pub fn instance_from_entry(entry: &PredictionEntry, image: &ImageRecord) -> Result<PredictionInstance> {
    if !(0.0..=1.0).contains(&entry.score) {
        return Err(Error::invalid(format!(
            "instance {}: score {} outside [0, 1]",
            entry.id, entry.score
        )));
    }
    let res = image.resolution(entry.frame);
    let mask = match (&entry.mask, &entry.polygon) {
        (Some(m), None) => m.clone(),
        (None, Some(p)) => SpanMask::from_polygon(p, res.width(), res.height())
            .map_err(|e| Error::invalid(format!("instance {}: {e}", entry.id)))?
            .to_rle(),
        _ => {
            return Err(Error::invalid(format!(
                "instance {}: exactly one of `mask` or `polygon` is required",
                entry.id
            )))
        }
    };
    let instance = PredictionInstance {
        id: entry.id.clone(),
        image_id: image.image_id.clone(),
        mask,
        score: entry.score,
        frame: entry.frame,
    };
    check_frame(&instance, image)?;
    Ok(instance)
}

fn check_frame(instance: &PredictionInstance, image: &ImageRecord) -> Result<()> {
    let res = image.resolution(instance.frame);
    if instance.mask.width != res.width() || instance.mask.height != res.height() {
        return Err(Error::invalid(format!(
            "instance {}: mask is {}x{} but image {} {:?} frame is {}x{}",
            instance.id,
            instance.mask.width,
            instance.mask.height,
            image.image_id,
            instance.frame,
            res.width(),
            res.height()
        )));
    }
    instance
        .mask
        .validate()
        .map_err(|e| Error::invalid(format!("instance {}: {e}", instance.id)))
}

/// Endpoints of every foreground span, as pixel corners in the native frame.
/// Enough to pin down the convex hull of all pixel corners: everything
/// in between lies on the same two horizontal lines.
fn span_corner_points(spans: &SpanMask, frame: Frame, image: &ImageRecord) -> Result<Vec<Point2>> {
    let mut pts = Vec::new();
    for (y, row) in spans.rows() {
        for &(a, b) in row {
            for (x, yy) in [(a, y), (b, y), (a, y + 1), (b, y + 1)] {
                let p = Point2::new(f64::from(x), f64::from(yy));
                pts.push(match frame {
                    Frame::Native => p,
                    Frame::Working => to_native(p, image)?,
                });
            }
        }
    }
    Ok(pts)
}

/// One clue per instance with `score >= score_threshold` and a non-empty mask,
/// ordered by descending score then instance id.
pub fn generate_clues<L: ImageLookup + ?Sized>(
    instances: &[PredictionInstance],
    images: &L,
    score_threshold: f64,
) -> Result<Vec<Clue>> {
    if !(0.0..=1.0).contains(&score_threshold) {
        return Err(Error::invalid(format!("score threshold {score_threshold} outside [0, 1]")));
    }
    let mut clues = Vec::new();
    for inst in instances {
        let image = images
            .image(&inst.image_id)
            .ok_or_else(|| Error::not_found(format!("image {} (instance {})", inst.image_id, inst.id)))?;
        check_frame(inst, image)?;
        if inst.score < score_threshold {
            continue;
        }
        let spans = SpanMask::from_rle(&inst.mask)?;
        if spans.is_empty() {
            continue;
        }
        let rect = min_area_rect_points(&span_corner_points(&spans, inst.frame, image)?)?;
        clues.push(Clue {
            id: clue_id_for(&inst.id),
            image_id: inst.image_id.clone(),
            rect,
            score: inst.score,
            source_instance: inst.id.clone(),
            status: ClueStatus::Proposed,
        });
    }
    clues.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.source_instance.cmp(&b.source_instance)));
    Ok(clues)
}

/// True iff all four corners of every foreground pixel lie inside or on the
/// clue rectangle (within [`CONTAINMENT_TOLERANCE_PX`]).
pub fn clue_containment_check(clue: &Clue, instance: &PredictionInstance, image: &ImageRecord) -> Result<bool> {
    if clue.source_instance != instance.id || clue.image_id != instance.image_id {
        return Err(Error::invalid(format!(
            "clue {} belongs to instance {}/{}, not {}/{}",
            clue.id, clue.image_id, clue.source_instance, instance.image_id, instance.id
        )));
    }
    check_frame(instance, image)?;
    let spans = SpanMask::from_rle(&instance.mask)?;
    if spans.is_empty() {
        return Err(Error::invalid(format!("instance {} has an empty mask; no clue can exist", instance.id)));
    }
    // The rectangle is convex, so span endpoints stand in for every corner.
    Ok(span_corner_points(&spans, instance.frame, image)?
        .into_iter()
        .all(|p| clue.rect.contains(p, CONTAINMENT_TOLERANCE_PX)))
}
