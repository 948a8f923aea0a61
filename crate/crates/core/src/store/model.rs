use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::mask::RleMask;
use crate::workflow::Arm;

/// Camera resolution of the inspection drone.
pub const NATIVE_RESOLUTION: Resolution = Resolution(5456, 3632);
/// Downsampled frame the model works in.
pub const WORKING_RESOLUTION: Resolution = Resolution(1500, 998);

/// `[width, height]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution(pub u32, pub u32);

impl Resolution {
    pub fn width(self) -> u32 {
        self.0
    }

    pub fn height(self) -> u32 {
        self.1
    }

    fn aspect(self) -> f64 {
        f64::from(self.0) / f64::from(self.1)
    }
}

/// Which pixel frame a piece of geometry was expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Native,
    Working,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionJob {
    pub job_id: String,
    pub turbine_id: String,
    pub arm: Arm,
    pub image_ids: Vec<String>,
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub job_id: String,
    pub file_ref: String,
    pub native_resolution: Resolution,
    pub working_resolution: Resolution,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ImageRecord {
    pub fn resolution(&self, frame: Frame) -> Resolution {
        match frame {
            Frame::Native => self.native_resolution,
            Frame::Working => self.working_resolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Qc1,
    Qc2,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Qc1 => "qc1",
            Stage::Qc2 => "qc2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Manual,
    ClueConverted(String),
    ClueModified(String),
}

impl Provenance {
    pub fn clue_id(&self) -> Option<&str> {
        match self {
            Provenance::Manual => None,
            Provenance::ClueConverted(id) | Provenance::ClueModified(id) => Some(id),
        }
    }

    pub fn is_from_clue(&self) -> bool {
        self.clue_id().is_some()
    }
}

/// An analyst-approved damage region. `damage_label` is only ever set by a human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "id")]
    pub annotation_id: String,
    pub image_id: String,
    pub polygon: Polygon,
    pub provenance: Provenance,
    #[serde(default)]
    pub damage_label: Option<String>,
    pub author: String,
    pub stage: Stage,
    pub created_at: i64,
}

/// Job manifest as uploaded by the inspection portal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobManifest {
    pub job_id: String,
    pub turbine_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<i64>,
    pub images: Vec<ManifestImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub image_id: String,
    pub file_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_resolution: Option<Resolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_resolution: Option<Resolution>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl JobManifest {
    /// Validates the manifest and materializes its image records.
    pub fn image_records(&self) -> Result<Vec<ImageRecord>> {
        if self.job_id.trim().is_empty() {
            return Err(Error::invalid("manifest job_id is empty"));
        }
        if self.images.is_empty() {
            return Err(Error::invalid(format!("job {} lists no images", self.job_id)));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(self.images.len());
        for img in &self.images {
            if img.image_id.trim().is_empty() {
                return Err(Error::invalid("manifest image_id is empty"));
            }
            if !seen.insert(img.image_id.as_str()) {
                return Err(Error::invalid(format!("duplicate image_id {}", img.image_id)));
            }
            let native = img.native_resolution.unwrap_or(NATIVE_RESOLUTION);
            let working = img.working_resolution.unwrap_or(WORKING_RESOLUTION);
            for (name, r) in [("native", native), ("working", working)] {
                if r.0 == 0 || r.1 == 0 {
                    return Err(Error::invalid(format!(
                        "image {}: {name} resolution {}x{} must be positive",
                        img.image_id, r.0, r.1
                    )));
                }
            }
            let skew = (native.aspect() / working.aspect() - 1.0).abs();
            if skew > 0.01 {
                return Err(Error::invalid(format!(
                    "image {}: native and working aspect ratios differ by {:.2}%",
                    img.image_id,
                    skew * 100.0
                )));
            }
            out.push(ImageRecord {
                image_id: img.image_id.clone(),
                job_id: self.job_id.clone(),
                file_ref: img.file_ref.clone(),
                native_resolution: native,
                working_resolution: working,
                metadata: img.metadata.clone(),
            });
        }
        Ok(out)
    }
}

/// Model adapter output for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub image_id: String,
    pub instances: Vec<PredictionEntry>,
}

/// One predicted instance: either an RLE mask or a polygon, in the stated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub id: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RleMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon>,
    #[serde(default)]
    pub frame: Frame,
}

/// Annotation export document for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationExport {
    pub image_id: String,
    pub annotations: Vec<Annotation>,
}
