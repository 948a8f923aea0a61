//! Two-stage QC process per image, A/B arm assignment and the journal event
//! vocabulary.
//!
//! ```text
//! INGESTED --predictions_ingested--> PREDICTED --qc1_open--> QC1_OPEN <--qc1_open-- QC1_PAUSED
//!    |  (control arm may open QC1 directly)        QC1_OPEN --qc1_close--> QC1_PAUSED
//!    +-------------------qc1_open----------------> QC1_PAUSED --qc1_complete--> QC1_DONE
//! QC1_DONE --qc2_open--> QC2_OPEN <-> QC2_PAUSED --qc2_complete--> QC2_DONE
//! ```
//!
//! Review actions (clue decisions, drawing, approval, missed-damage flags)
//! are only legal while a stage session is open. Clue actions additionally
//! require the treatment arm.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clue::{Clue, PredictionInstance};
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::store::model::{Annotation, ImageRecord, InspectionJob, JobManifest, Stage};

pub const DEFAULT_CONTROL_RATIO: f64 = 0.8;
pub const DEFAULT_SALT: &str = "bladeqc-clues-ab-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Previous process: no clues shown.
    Control,
    /// Clues shown in QC1.
    Treatment,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treatment => "treatment",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(Arm::Control),
            "treatment" => Ok(Arm::Treatment),
            other => Err(Error::invalid(format!("unknown arm `{other}` (expected control|treatment)"))),
        }
    }
}

/// Stable 64-bit hash of `(salt, job_id)` mapped to `[0, 1)`.
pub fn bucket_unit(job_id: &str, salt: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0x1f]);
    h.update(job_id.as_bytes());
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic arm: `control` when the job's bucket falls below `control_ratio`.
pub fn assign_arm(job_id: &str, control_ratio: f64, salt: &str) -> Result<Arm> {
    if !(control_ratio > 0.0 && control_ratio < 1.0) {
        return Err(Error::invalid(format!("control ratio {control_ratio} must lie in (0, 1)")));
    }
    Ok(if bucket_unit(job_id, salt) < control_ratio { Arm::Control } else { Arm::Treatment })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WorkflowState {
    Ingested,
    Predicted,
    Qc1Open,
    /// QC1 started, no session currently open.
    Qc1Paused,
    Qc1Done,
    Qc2Open,
    Qc2Paused,
    Qc2Done,
}

impl WorkflowState {
    pub const ALL: [WorkflowState; 8] = [
        WorkflowState::Ingested,
        WorkflowState::Predicted,
        WorkflowState::Qc1Open,
        WorkflowState::Qc1Paused,
        WorkflowState::Qc1Done,
        WorkflowState::Qc2Open,
        WorkflowState::Qc2Paused,
        WorkflowState::Qc2Done,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkflowState::Ingested => "INGESTED",
            WorkflowState::Predicted => "PREDICTED",
            WorkflowState::Qc1Open => "QC1_OPEN",
            WorkflowState::Qc1Paused => "QC1_PAUSED",
            WorkflowState::Qc1Done => "QC1_DONE",
            WorkflowState::Qc2Open => "QC2_OPEN",
            WorkflowState::Qc2Paused => "QC2_PAUSED",
            WorkflowState::Qc2Done => "QC2_DONE",
        }
    }

    /// QC1 has been completed (QC1_DONE or any QC2 state).
    pub fn qc1_completed(self) -> bool {
        self >= WorkflowState::Qc1Done
    }

    /// Stage whose session is currently open, if any.
    pub fn open_stage(self) -> Option<Stage> {
        match self {
            WorkflowState::Qc1Open => Some(Stage::Qc1),
            WorkflowState::Qc2Open => Some(Stage::Qc2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageAction {
    PredictionsIngested,
    Qc1Open,
    ClueConverted,
    ClueModified,
    ClueDismissed,
    AnnotationDrawn,
    AnnotationEdited,
    Qc1Close,
    Qc1Complete,
    Qc2Open,
    AnnotationApproved,
    MissedDamageFlagged,
    Qc2Close,
    Qc2Complete,
}

impl ImageAction {
    pub const ALL: [ImageAction; 14] = [
        ImageAction::PredictionsIngested,
        ImageAction::Qc1Open,
        ImageAction::ClueConverted,
        ImageAction::ClueModified,
        ImageAction::ClueDismissed,
        ImageAction::AnnotationDrawn,
        ImageAction::AnnotationEdited,
        ImageAction::Qc1Close,
        ImageAction::Qc1Complete,
        ImageAction::Qc2Open,
        ImageAction::AnnotationApproved,
        ImageAction::MissedDamageFlagged,
        ImageAction::Qc2Close,
        ImageAction::Qc2Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImageAction::PredictionsIngested => "predictions_ingested",
            ImageAction::Qc1Open => "qc1_open",
            ImageAction::ClueConverted => "clue_converted",
            ImageAction::ClueModified => "clue_modified",
            ImageAction::ClueDismissed => "clue_dismissed",
            ImageAction::AnnotationDrawn => "annotation_drawn",
            ImageAction::AnnotationEdited => "annotation_edited",
            ImageAction::Qc1Close => "qc1_close",
            ImageAction::Qc1Complete => "qc1_complete",
            ImageAction::Qc2Open => "qc2_open",
            ImageAction::AnnotationApproved => "annotation_approved",
            ImageAction::MissedDamageFlagged => "missed_damage_flagged",
            ImageAction::Qc2Close => "qc2_close",
            ImageAction::Qc2Complete => "qc2_complete",
        }
    }

    pub fn is_clue_action(self) -> bool {
        matches!(self, ImageAction::ClueConverted | ImageAction::ClueModified | ImageAction::ClueDismissed)
    }
}

/// The transition function. Pure; the arm only matters for clue actions and
/// for control-arm images opening QC1 without predictions.
pub fn transition(arm: Arm, state: WorkflowState, action: ImageAction) -> Result<WorkflowState> {
    use ImageAction as A;
    use WorkflowState as S;
    if action.is_clue_action() && arm == Arm::Control {
        return Err(Error::rejected(format!(
            "{} is not available on control-arm images (no clues are shown)",
            action.as_str()
        )));
    }
    let next = match (state, action) {
        (S::Ingested, A::PredictionsIngested) => Some(S::Predicted),
        (S::Ingested, A::Qc1Open) if arm == Arm::Control => Some(S::Qc1Open),
        (S::Predicted, A::Qc1Open) => Some(S::Qc1Open),
        (
            S::Qc1Open,
            A::ClueConverted | A::ClueModified | A::ClueDismissed | A::AnnotationDrawn | A::AnnotationEdited,
        ) => Some(S::Qc1Open),
        (S::Qc1Open, A::Qc1Close) => Some(S::Qc1Paused),
        (S::Qc1Paused, A::Qc1Open) => Some(S::Qc1Open),
        (S::Qc1Paused, A::Qc1Complete) => Some(S::Qc1Done),
        (S::Qc1Done, A::Qc2Open) => Some(S::Qc2Open),
        (
            S::Qc2Open,
            A::AnnotationApproved | A::MissedDamageFlagged | A::AnnotationDrawn | A::AnnotationEdited,
        ) => Some(S::Qc2Open),
        (S::Qc2Open, A::Qc2Close) => Some(S::Qc2Paused),
        (S::Qc2Paused, A::Qc2Open) => Some(S::Qc2Open),
        (S::Qc2Paused, A::Qc2Complete) => Some(S::Qc2Done),
        _ => None,
    };
    next.ok_or_else(|| Error::IllegalTransition {
        state: state.as_str().to_string(),
        action: action.as_str().to_string(),
    })
}

/// One row of the published transition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub arm: Arm,
    pub state: WorkflowState,
    pub action: ImageAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next: Option<WorkflowState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<String>,
}

/// Every `(arm, state, action)` combination with its outcome.
pub fn transition_table() -> Vec<TransitionEntry> {
    let mut out = Vec::with_capacity(2 * WorkflowState::ALL.len() * ImageAction::ALL.len());
    for arm in Arm::ALL {
        for state in WorkflowState::ALL {
            for action in ImageAction::ALL {
                let (next, reject) = match transition(arm, state, action) {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e.code().to_string())),
                };
                out.push(TransitionEntry { arm, state, action, next, reject });
            }
        }
    }
    out
}

/// Journal payloads, tagged by action name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum Event {
    JobIngested {
        job: InspectionJob,
        images: Vec<ImageRecord>,
        manifest: JobManifest,
    },
    PredictionsIngested {
        image_id: String,
        score_threshold: f64,
        instances: Vec<PredictionInstance>,
        clues: Vec<Clue>,
    },
    Qc1Open {
        image_id: String,
    },
    ClueConverted {
        image_id: String,
        clue_id: String,
        annotation: Annotation,
    },
    ClueModified {
        image_id: String,
        clue_id: String,
        annotation: Annotation,
    },
    ClueDismissed {
        image_id: String,
        clue_id: String,
    },
    AnnotationDrawn {
        image_id: String,
        annotation: Annotation,
    },
    AnnotationEdited {
        image_id: String,
        annotation_id: String,
        polygon: Polygon,
    },
    Qc1Close {
        image_id: String,
    },
    Qc1Complete {
        image_id: String,
    },
    Qc2Open {
        image_id: String,
    },
    AnnotationApproved {
        image_id: String,
        annotation_id: String,
    },
    MissedDamageFlagged {
        image_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotation: Option<Annotation>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Qc2Close {
        image_id: String,
    },
    Qc2Complete {
        image_id: String,
    },
}

impl Event {
    pub fn image_id(&self) -> Option<&str> {
        match self {
            Event::JobIngested { .. } => None,
            Event::PredictionsIngested { image_id, .. }
            | Event::Qc1Open { image_id }
            | Event::ClueConverted { image_id, .. }
            | Event::ClueModified { image_id, .. }
            | Event::ClueDismissed { image_id, .. }
            | Event::AnnotationDrawn { image_id, .. }
            | Event::AnnotationEdited { image_id, .. }
            | Event::Qc1Close { image_id }
            | Event::Qc1Complete { image_id }
            | Event::Qc2Open { image_id }
            | Event::AnnotationApproved { image_id, .. }
            | Event::MissedDamageFlagged { image_id, .. }
            | Event::Qc2Close { image_id }
            | Event::Qc2Complete { image_id } => Some(image_id),
        }
    }

    pub fn image_action(&self) -> Option<ImageAction> {
        Some(match self {
            Event::JobIngested { .. } => return None,
            Event::PredictionsIngested { .. } => ImageAction::PredictionsIngested,
            Event::Qc1Open { .. } => ImageAction::Qc1Open,
            Event::ClueConverted { .. } => ImageAction::ClueConverted,
            Event::ClueModified { .. } => ImageAction::ClueModified,
            Event::ClueDismissed { .. } => ImageAction::ClueDismissed,
            Event::AnnotationDrawn { .. } => ImageAction::AnnotationDrawn,
            Event::AnnotationEdited { .. } => ImageAction::AnnotationEdited,
            Event::Qc1Close { .. } => ImageAction::Qc1Close,
            Event::Qc1Complete { .. } => ImageAction::Qc1Complete,
            Event::Qc2Open { .. } => ImageAction::Qc2Open,
            Event::AnnotationApproved { .. } => ImageAction::AnnotationApproved,
            Event::MissedDamageFlagged { .. } => ImageAction::MissedDamageFlagged,
            Event::Qc2Close { .. } => ImageAction::Qc2Close,
            Event::Qc2Complete { .. } => ImageAction::Qc2Complete,
        })
    }

    pub fn action_name(&self) -> &'static str {
        self.image_action().map_or("job_ingested", ImageAction::as_str)
    }
}

/// One journal line: `{seq, job_id, timestamp, actor, action, payload}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub job_id: String,
    /// Wall-clock milliseconds.
    pub timestamp: i64,
    pub actor: String,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn image_id(&self) -> Option<&str> {
        self.event.image_id()
    }
}

/// Advances an image's state by one journal event.
pub fn apply_event(arm: Arm, state: WorkflowState, e: &EventRecord) -> Result<WorkflowState> {
    let action = e.event.image_action().ok_or_else(|| {
        Error::invalid(format!("{} is a job-level event, not an image transition", e.event.action_name()))
    })?;
    transition(arm, state, action)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcDurations {
    pub qc1_minutes: f64,
    pub qc2_minutes: f64,
    /// Exact totals; aggregate these rather than the rounded minutes.
    pub qc1_ms: i64,
    pub qc2_ms: i64,
}

/// Sums `close - open` intervals per stage for one image's events, in minutes.
pub fn qc_durations(events: &[EventRecord]) -> Result<QcDurations> {
    let mut image: Option<&str> = None;
    let mut open: [Option<i64>; 2] = [None, None];
    let mut total_ms: [i64; 2] = [0, 0];
    let mut sorted: Vec<&EventRecord> = events.iter().collect();
    sorted.sort_by_key(|e| e.seq);
    for e in sorted {
        if let Some(id) = e.image_id() {
            match image {
                Some(prev) if prev != id => {
                    return Err(Error::invalid(format!(
                        "qc_durations expects one image, got {prev} and {id}"
                    )))
                }
                _ => image = Some(id),
            }
        }
        let (stage, opening) = match e.event {
            Event::Qc1Open { .. } => (0, true),
            Event::Qc1Close { .. } => (0, false),
            Event::Qc2Open { .. } => (1, true),
            Event::Qc2Close { .. } => (1, false),
            _ => continue,
        };
        if opening {
            if open[stage].is_some() {
                return Err(Error::invalid(format!("seq {}: session opened twice", e.seq)));
            }
            open[stage] = Some(e.timestamp);
        } else {
            let start = open[stage]
                .take()
                .ok_or_else(|| Error::invalid(format!("seq {}: close without open", e.seq)))?;
            if e.timestamp < start {
                return Err(Error::invalid(format!("seq {}: session closes before it opens", e.seq)));
            }
            total_ms[stage] += e.timestamp - start;
        }
    }
    if open.iter().any(Option::is_some) {
        return Err(Error::invalid(format!(
            "image {} has an open QC session; durations are only defined once it is closed",
            image.unwrap_or("?")
        )));
    }
    Ok(QcDurations {
        qc1_minutes: total_ms[0] as f64 / 60_000.0,
        qc2_minutes: total_ms[1] as f64 / 60_000.0,
        qc1_ms: total_ms[0],
        qc2_ms: total_ms[1],
    })
}
