//! Inspection data model and the event-sourced store.
//!
//! Every change is an [`EventRecord`] appended to a per-job sequence; the
//! in-memory [`StoreState`] is a pure fold over the journal. Commands on
//! [`Store`] build an event, validate it against the current state, persist
//! it (when file-backed), and only then apply it.

pub mod frame;
pub mod model;
pub mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clue::{generate_clues, instance_from_entry, Clue, ClueStatus, ImageLookup, PredictionInstance};
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::workflow::{self, assign_arm, Arm, Event, EventRecord, ImageAction, WorkflowState};

pub use frame::{to_native, to_working};
pub use model::*;
pub use split::{split_dataset, DatasetSplit, Split};

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    /// Fraction of jobs routed to the control (no clues) arm.
    pub control_ratio: f64,
    pub salt: String,
    pub default_score_threshold: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            control_ratio: workflow::DEFAULT_CONTROL_RATIO,
            salt: workflow::DEFAULT_SALT.to_string(),
            default_score_threshold: crate::clue::DEFAULT_SCORE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageState {
    pub record: ImageRecord,
    pub state: WorkflowState,
    pub instances: Vec<PredictionInstance>,
    pub clues: Vec<Clue>,
    pub annotations: Vec<Annotation>,
    pub approved: BTreeSet<String>,
    pub missed_damages: u32,
}

impl ImageState {
    pub fn clue(&self, clue_id: &str) -> Option<&Clue> {
        self.clues.iter().find(|c| c.id == clue_id)
    }

    pub fn annotation(&self, annotation_id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.annotation_id == annotation_id)
    }

    fn next_annotation_id(&self) -> String {
        format!("{}-a{:03}", self.record.image_id, self.annotations.len() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobState {
    pub job: InspectionJob,
    pub manifest: JobManifest,
    pub last_seq: u64,
    pub images: BTreeMap<String, ImageState>,
    pub events: Vec<EventRecord>,
}

impl JobState {
    /// Every image has reached `state` or later.
    pub fn all_images_at_least(&self, state: WorkflowState) -> bool {
        self.images.values().all(|i| i.state >= state)
    }

    pub fn image_events<'a>(&'a self, image_id: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.events.iter().filter(move |e| e.image_id() == Some(image_id))
    }
}

/// Derived state: a pure function of the journal.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StoreState {
    pub jobs: BTreeMap<String, JobState>,
    pub image_jobs: BTreeMap<String, String>,
}

impl ImageLookup for StoreState {
    fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.image_state(image_id).ok().map(|i| &i.record)
    }
}

impl StoreState {
    pub fn job(&self, job_id: &str) -> Result<&JobState> {
        self.jobs.get(job_id).ok_or_else(|| Error::not_found(format!("job {job_id}")))
    }

    pub fn image_state(&self, image_id: &str) -> Result<&ImageState> {
        let job = self
            .image_jobs
            .get(image_id)
            .ok_or_else(|| Error::not_found(format!("image {image_id}")))?;
        Ok(&self.jobs[job].images[image_id])
    }

    fn image_mut(&mut self, image_id: &str) -> &mut ImageState {
        let job = &self.image_jobs[image_id];
        self.jobs.get_mut(job).and_then(|j| j.images.get_mut(image_id)).expect("validated image")
    }

    /// Canonical serialization; two states are equal iff these strings are.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("store state serializes")
    }

    /// Checks `rec` against the current state without changing anything.
    pub fn validate(&self, rec: &EventRecord) -> Result<()> {
        if let Event::JobIngested { job, images, manifest } = &rec.event {
            if self.jobs.contains_key(&rec.job_id) {
                return Err(Error::conflict(format!("job {} already exists", rec.job_id)));
            }
            if rec.seq != 1 {
                return Err(Error::conflict(format!("job {} must start at seq 1, got {}", rec.job_id, rec.seq)));
            }
            if job.job_id != rec.job_id || manifest.job_id != rec.job_id {
                return Err(Error::invalid("job_ingested payload does not match record job_id"));
            }
            let ids: Vec<&String> = images.iter().map(|i| &i.image_id).collect();
            if job.image_ids.iter().collect::<Vec<_>>() != ids {
                return Err(Error::invalid("job image_ids do not match image records"));
            }
            for img in images {
                if img.job_id != rec.job_id {
                    return Err(Error::invalid(format!("image {} claims job {}", img.image_id, img.job_id)));
                }
                if let Some(other) = self.image_jobs.get(&img.image_id) {
                    return Err(Error::conflict(format!(
                        "image {} already belongs to job {other}",
                        img.image_id
                    )));
                }
            }
            return Ok(());
        }

        let image_id = rec.image_id().expect("non-job events carry an image id");
        let job_id = self
            .image_jobs
            .get(image_id)
            .ok_or_else(|| Error::not_found(format!("image {image_id}")))?;
        if *job_id != rec.job_id {
            return Err(Error::invalid(format!(
                "image {image_id} belongs to job {job_id}, not {}",
                rec.job_id
            )));
        }
        let job = &self.jobs[job_id];
        if rec.seq != job.last_seq + 1 {
            return Err(Error::conflict(format!(
                "stale sequence for job {job_id}: expected {}, got {}",
                job.last_seq + 1,
                rec.seq
            )));
        }
        let img = &job.images[image_id];
        workflow::apply_event(job.job.arm, img.state, rec)?;
        let frame = img.record.native_resolution;
        let check_polygon = |p: &Polygon| {
            if p.within_frame(frame.width(), frame.height()) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "annotation polygon exceeds the native {}x{} frame",
                    frame.width(),
                    frame.height()
                )))
            }
        };
        let check_new_annotation = |a: &Annotation, stage: Stage| -> Result<()> {
            if a.image_id != image_id {
                return Err(Error::invalid("annotation image_id does not match event"));
            }
            if img.annotation(&a.annotation_id).is_some() {
                return Err(Error::conflict(format!("annotation {} already exists", a.annotation_id)));
            }
            if a.stage != stage {
                return Err(Error::invalid(format!(
                    "annotation stage {} does not match open stage {}",
                    a.stage.as_str(),
                    stage.as_str()
                )));
            }
            check_polygon(&a.polygon)
        };
        let proposed_clue = |clue_id: &str| -> Result<&Clue> {
            let clue = img
                .clue(clue_id)
                .ok_or_else(|| Error::not_found(format!("clue {clue_id} on image {image_id}")))?;
            if clue.status != ClueStatus::Proposed {
                return Err(Error::conflict(format!(
                    "clue {clue_id} is already {:?}",
                    clue.status
                )));
            }
            Ok(clue)
        };

        match &rec.event {
            Event::JobIngested { .. } => unreachable!(),
            Event::PredictionsIngested { instances, clues, .. } => {
                if instances.iter().any(|i| i.image_id != image_id) || clues.iter().any(|c| c.image_id != image_id) {
                    return Err(Error::invalid("prediction payload mixes images"));
                }
                if job.job.arm == Arm::Control && !clues.is_empty() {
                    return Err(Error::rejected("control-arm images never receive clues"));
                }
            }
            Event::ClueConverted { clue_id, annotation, .. } => {
                let clue = proposed_clue(clue_id)?;
                if annotation.provenance != Provenance::ClueConverted(clue_id.clone()) {
                    return Err(Error::invalid("converted annotation must carry clue_converted provenance"));
                }
                if annotation.polygon.vertices() != clue.rect.to_polygon().vertices() {
                    return Err(Error::invalid("unedited conversion must reuse the clue corners"));
                }
                check_new_annotation(annotation, Stage::Qc1)?;
            }
            Event::ClueModified { clue_id, annotation, .. } => {
                proposed_clue(clue_id)?;
                if annotation.provenance != Provenance::ClueModified(clue_id.clone()) {
                    return Err(Error::invalid("modified annotation must carry clue_modified provenance"));
                }
                check_new_annotation(annotation, Stage::Qc1)?;
            }
            Event::ClueDismissed { clue_id, .. } => {
                proposed_clue(clue_id)?;
            }
            Event::AnnotationDrawn { annotation, .. } => {
                if annotation.provenance != Provenance::Manual {
                    return Err(Error::invalid("drawn annotations have manual provenance"));
                }
                let stage = img.state.open_stage().expect("transition guarantees an open stage");
                check_new_annotation(annotation, stage)?;
            }
            Event::AnnotationEdited { annotation_id, polygon, .. } => {
                img.annotation(annotation_id)
                    .ok_or_else(|| Error::not_found(format!("annotation {annotation_id}")))?;
                check_polygon(polygon)?;
            }
            Event::AnnotationApproved { annotation_id, .. } => {
                img.annotation(annotation_id)
                    .ok_or_else(|| Error::not_found(format!("annotation {annotation_id}")))?;
                if img.approved.contains(annotation_id) {
                    return Err(Error::conflict(format!("annotation {annotation_id} already approved")));
                }
            }
            Event::MissedDamageFlagged { annotation, .. } => {
                if let Some(a) = annotation {
                    if a.provenance != Provenance::Manual {
                        return Err(Error::invalid("missed-damage annotations have manual provenance"));
                    }
                    check_new_annotation(a, Stage::Qc2)?;
                }
            }
            Event::Qc1Open { .. }
            | Event::Qc1Close { .. }
            | Event::Qc1Complete { .. }
            | Event::Qc2Open { .. }
            | Event::Qc2Close { .. }
            | Event::Qc2Complete { .. } => {}
        }
        Ok(())
    }

    /// Applies an event that has passed [`StoreState::validate`].
    fn commit(&mut self, rec: EventRecord) {
        if let Event::JobIngested { job, images, manifest } = &rec.event {
            for img in images {
                self.image_jobs.insert(img.image_id.clone(), job.job_id.clone());
            }
            let images = images
                .iter()
                .map(|r| {
                    let state = ImageState {
                        record: r.clone(),
                        state: WorkflowState::Ingested,
                        instances: Vec::new(),
                        clues: Vec::new(),
                        annotations: Vec::new(),
                        approved: BTreeSet::new(),
                        missed_damages: 0,
                    };
                    (r.image_id.clone(), state)
                })
                .collect();
            self.jobs.insert(
                job.job_id.clone(),
                JobState {
                    job: job.clone(),
                    manifest: manifest.clone(),
                    last_seq: rec.seq,
                    images,
                    events: vec![rec],
                },
            );
            return;
        }

        let image_id = rec.image_id().expect("image event").to_string();
        let arm = self.jobs[&rec.job_id].job.arm;
        let img = self.image_mut(&image_id);
        img.state = workflow::apply_event(arm, img.state, &rec).expect("validated transition");
        let set_status = |img: &mut ImageState, clue_id: &str, status: ClueStatus| {
            if let Some(c) = img.clues.iter_mut().find(|c| c.id == clue_id) {
                c.status = status;
            }
        };
        match &rec.event {
            Event::PredictionsIngested { instances, clues, .. } => {
                img.instances = instances.clone();
                img.clues = clues.clone();
            }
            Event::ClueConverted { clue_id, annotation, .. } => {
                set_status(img, clue_id, ClueStatus::Converted);
                img.annotations.push(annotation.clone());
            }
            Event::ClueModified { clue_id, annotation, .. } => {
                set_status(img, clue_id, ClueStatus::Modified);
                img.annotations.push(annotation.clone());
            }
            Event::ClueDismissed { clue_id, .. } => set_status(img, clue_id, ClueStatus::Dismissed),
            Event::AnnotationDrawn { annotation, .. } => img.annotations.push(annotation.clone()),
            Event::AnnotationEdited { annotation_id, polygon, .. } => {
                if let Some(a) = img.annotations.iter_mut().find(|a| &a.annotation_id == annotation_id) {
                    a.polygon = polygon.clone();
                }
            }
            Event::AnnotationApproved { annotation_id, .. } => {
                img.approved.insert(annotation_id.clone());
            }
            Event::MissedDamageFlagged { annotation, .. } => {
                img.missed_damages += 1;
                if let Some(a) = annotation {
                    img.annotations.push(a.clone());
                }
            }
            _ => {}
        }
        let job = self.jobs.get_mut(&rec.job_id).expect("validated job");
        job.last_seq = rec.seq;
        job.events.push(rec);
    }

    /// Validates and applies one event.
    pub fn apply(&mut self, rec: EventRecord) -> Result<()> {
        self.validate(&rec)?;
        self.commit(rec);
        Ok(())
    }

    /// Folds a journal into a fresh state.
    pub fn replay<I: IntoIterator<Item = EventRecord>>(records: I) -> Result<StoreState> {
        let mut state = StoreState::default();
        for rec in records {
            let seq = rec.seq;
            let job = rec.job_id.clone();
            state.apply(rec).map_err(|e| replay_error(&job, seq, e))?;
        }
        Ok(state)
    }
}

fn replay_error(job: &str, seq: u64, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(io),
        other => Error::invalid(format!("journal replay failed at job {job} seq {seq}: {other}")),
    }
}

/// Reads a JSON-lines journal.
pub fn read_journal(reader: impl BufRead) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("journal line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// The store: derived state plus an optional append-only journal file.
#[derive(Debug)]
pub struct Store {
    config: StoreConfig,
    state: StoreState,
    journal: Option<(PathBuf, File)>,
}

impl Store {
    pub fn in_memory(config: StoreConfig) -> Self {
        Self { config, state: StoreState::default(), journal: None }
    }

    /// Opens (creating if needed) a data directory and replays its journal.
    pub fn open(data_dir: &Path, config: StoreConfig) -> Result<Self> {
        std::fs::create_dir_all(data_dir)?;
        let path = data_dir.join(JOURNAL_FILE);
        let state = if path.exists() {
            StoreState::replay(read_journal(BufReader::new(File::open(&path)?))?)?
        } else {
            StoreState::default()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { config, state, journal: Some((path, file)) })
    }

    /// Rebuilds an in-memory store from a journal file.
    pub fn from_journal(path: &Path, config: StoreConfig) -> Result<Self> {
        let records = read_journal(BufReader::new(File::open(path)?))?;
        Ok(Self { config, state: StoreState::replay(records)?, journal: None })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|(p, _)| p.as_path())
    }

    /// All journal records in append order (jobs interleaved by time of arrival
    /// are not tracked; records are grouped per job).
    pub fn records(&self) -> impl Iterator<Item = &EventRecord> {
        self.state.jobs.values().flat_map(|j| j.events.iter())
    }

    /// Appends an event under optimistic concurrency: `expected_seq` is the
    /// last sequence number the caller observed for the job (0 for a new job).
    pub fn append_event(
        &mut self,
        job_id: &str,
        expected_seq: u64,
        actor: &str,
        timestamp: i64,
        event: Event,
    ) -> Result<u64> {
        let current = self.state.jobs.get(job_id).map_or(0, |j| j.last_seq);
        if expected_seq != current {
            return Err(Error::conflict(format!(
                "stale expected sequence for job {job_id}: caller saw {expected_seq}, journal is at {current}"
            )));
        }
        let rec = EventRecord {
            seq: current + 1,
            job_id: job_id.to_string(),
            timestamp,
            actor: actor.to_string(),
            event,
        };
        self.state.validate(&rec)?;
        if let Some((_, file)) = self.journal.as_mut() {
            let mut line = serde_json::to_string(&rec)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        let seq = rec.seq;
        self.state.commit(rec);
        Ok(seq)
    }

    fn append_for_image(&mut self, image_id: &str, actor: &str, ts: i64, event: Event) -> Result<u64> {
        let job_id = self
            .state
            .image_jobs
            .get(image_id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("image {image_id}")))?;
        let seq = self.state.jobs[&job_id].last_seq;
        self.append_event(&job_id, seq, actor, ts, event)
    }

    /// Registers a job. Re-ingesting an identical manifest returns the
    /// existing job and `false`; a different manifest under the same id is a
    /// conflict.
    pub fn ingest_job(&mut self, manifest: &JobManifest, actor: &str, now: i64) -> Result<(InspectionJob, bool)> {
        let images = manifest.image_records()?;
        if let Some(existing) = self.state.jobs.get(&manifest.job_id) {
            let mut incoming = manifest.clone();
            if incoming.created_at.is_none() {
                incoming.created_at = existing.manifest.created_at;
            }
            if incoming == existing.manifest {
                return Ok((existing.job.clone(), false));
            }
            return Err(Error::conflict(format!(
                "job {} already ingested with different content",
                manifest.job_id
            )));
        }
        let arm = assign_arm(&manifest.job_id, self.config.control_ratio, &self.config.salt)?;
        let job = InspectionJob {
            job_id: manifest.job_id.clone(),
            turbine_id: manifest.turbine_id.clone(),
            arm,
            image_ids: images.iter().map(|i| i.image_id.clone()).collect(),
            created_at: manifest.created_at.unwrap_or(now),
        };
        let event = Event::JobIngested { job: job.clone(), images, manifest: manifest.clone() };
        self.append_event(&manifest.job_id, 0, actor, now, event)?;
        Ok((job, true))
    }

    /// Converts a prediction file into instances and clues for one image.
    /// Control-arm images keep their instances but receive no clues.
    pub fn ingest_predictions(
        &mut self,
        file: &PredictionFile,
        score_threshold: Option<f64>,
        actor: &str,
        now: i64,
    ) -> Result<Vec<Clue>> {
        let threshold = score_threshold.unwrap_or(self.config.default_score_threshold);
        let img = self.state.image_state(&file.image_id)?;
        let mut ids = BTreeSet::new();
        let instances = file
            .instances
            .iter()
            .map(|e| {
                if !ids.insert(e.id.as_str()) {
                    return Err(Error::invalid(format!("duplicate instance id {}", e.id)));
                }
                instance_from_entry(e, &img.record)
            })
            .collect::<Result<Vec<_>>>()?;
        let arm = self.state.jobs[&img.record.job_id].job.arm;
        let clues = match arm {
            Arm::Treatment => generate_clues(&instances, &img.record, threshold)?,
            Arm::Control => {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::invalid(format!("score threshold {threshold} outside [0, 1]")));
                }
                Vec::new()
            }
        };
        let event = Event::PredictionsIngested {
            image_id: file.image_id.clone(),
            score_threshold: threshold,
            instances,
            clues: clues.clone(),
        };
        self.append_for_image(&file.image_id, actor, now, event)?;
        Ok(clues)
    }

    pub fn open_stage(&mut self, image_id: &str, stage: Stage, actor: &str, now: i64) -> Result<WorkflowState> {
        let image_id = image_id.to_string();
        let event = match stage {
            Stage::Qc1 => Event::Qc1Open { image_id: image_id.clone() },
            Stage::Qc2 => Event::Qc2Open { image_id: image_id.clone() },
        };
        self.append_for_image(&image_id, actor, now, event)?;
        Ok(self.state.image_state(&image_id)?.state)
    }

    pub fn close_stage(&mut self, image_id: &str, stage: Stage, actor: &str, now: i64) -> Result<WorkflowState> {
        let image_id = image_id.to_string();
        let event = match stage {
            Stage::Qc1 => Event::Qc1Close { image_id: image_id.clone() },
            Stage::Qc2 => Event::Qc2Close { image_id: image_id.clone() },
        };
        self.append_for_image(&image_id, actor, now, event)?;
        Ok(self.state.image_state(&image_id)?.state)
    }

    pub fn complete_stage(&mut self, image_id: &str, stage: Stage, actor: &str, now: i64) -> Result<WorkflowState> {
        let image_id = image_id.to_string();
        let event = match stage {
            Stage::Qc1 => Event::Qc1Complete { image_id: image_id.clone() },
            Stage::Qc2 => Event::Qc2Complete { image_id: image_id.clone() },
        };
        self.append_for_image(&image_id, actor, now, event)?;
        Ok(self.state.image_state(&image_id)?.state)
    }

    /// Turns a proposed clue into an annotation: unedited conversions reuse
    /// the rectangle corners exactly, edited ones carry the analyst's polygon.
    pub fn convert_clue(
        &mut self,
        image_id: &str,
        clue_id: &str,
        edited: Option<Polygon>,
        damage_label: Option<String>,
        actor: &str,
        now: i64,
    ) -> Result<Annotation> {
        let img = self.state.image_state(image_id)?;
        self.precheck(image_id, if edited.is_some() { ImageAction::ClueModified } else { ImageAction::ClueConverted })?;
        let clue = img
            .clue(clue_id)
            .ok_or_else(|| Error::not_found(format!("clue {clue_id} on image {image_id}")))?;
        let (polygon, provenance) = match edited {
            Some(p) => (p, Provenance::ClueModified(clue_id.to_string())),
            None => (clue.rect.to_polygon(), Provenance::ClueConverted(clue_id.to_string())),
        };
        let annotation = Annotation {
            annotation_id: img.next_annotation_id(),
            image_id: image_id.to_string(),
            polygon,
            provenance,
            damage_label,
            author: actor.to_string(),
            stage: Stage::Qc1,
            created_at: now,
        };
        let event = match annotation.provenance {
            Provenance::ClueModified(_) => Event::ClueModified {
                image_id: image_id.to_string(),
                clue_id: clue_id.to_string(),
                annotation: annotation.clone(),
            },
            _ => Event::ClueConverted {
                image_id: image_id.to_string(),
                clue_id: clue_id.to_string(),
                annotation: annotation.clone(),
            },
        };
        self.append_for_image(image_id, actor, now, event)?;
        Ok(annotation)
    }

    pub fn dismiss_clue(&mut self, image_id: &str, clue_id: &str, actor: &str, now: i64) -> Result<Clue> {
        let event = Event::ClueDismissed { image_id: image_id.to_string(), clue_id: clue_id.to_string() };
        self.append_for_image(image_id, actor, now, event)?;
        Ok(self.state.image_state(image_id)?.clue(clue_id).cloned().expect("dismissed clue exists"))
    }

    /// Manual annotation in whichever stage session is open.
    pub fn draw_annotation(
        &mut self,
        image_id: &str,
        polygon: Polygon,
        damage_label: Option<String>,
        actor: &str,
        now: i64,
    ) -> Result<Annotation> {
        self.precheck(image_id, ImageAction::AnnotationDrawn)?;
        let img = self.state.image_state(image_id)?;
        let annotation = Annotation {
            annotation_id: img.next_annotation_id(),
            image_id: image_id.to_string(),
            polygon,
            provenance: Provenance::Manual,
            damage_label,
            author: actor.to_string(),
            stage: img.state.open_stage().expect("precheck guarantees an open stage"),
            created_at: now,
        };
        let event = Event::AnnotationDrawn { image_id: image_id.to_string(), annotation: annotation.clone() };
        self.append_for_image(image_id, actor, now, event)?;
        Ok(annotation)
    }

    pub fn edit_annotation(
        &mut self,
        image_id: &str,
        annotation_id: &str,
        polygon: Polygon,
        actor: &str,
        now: i64,
    ) -> Result<Annotation> {
        let event = Event::AnnotationEdited {
            image_id: image_id.to_string(),
            annotation_id: annotation_id.to_string(),
            polygon,
        };
        self.append_for_image(image_id, actor, now, event)?;
        Ok(self.state.image_state(image_id)?.annotation(annotation_id).cloned().expect("edited annotation"))
    }

    pub fn approve_annotation(&mut self, image_id: &str, annotation_id: &str, actor: &str, now: i64) -> Result<()> {
        let event = Event::AnnotationApproved {
            image_id: image_id.to_string(),
            annotation_id: annotation_id.to_string(),
        };
        self.append_for_image(image_id, actor, now, event).map(|_| ())
    }

    /// Records a damage QC1 missed; optionally adds its polygon as a QC2 annotation.
    pub fn flag_missed(
        &mut self,
        image_id: &str,
        polygon: Option<Polygon>,
        damage_label: Option<String>,
        note: Option<String>,
        actor: &str,
        now: i64,
    ) -> Result<Option<Annotation>> {
        self.precheck(image_id, ImageAction::MissedDamageFlagged)?;
        let img = self.state.image_state(image_id)?;
        let annotation = polygon.map(|polygon| Annotation {
            annotation_id: img.next_annotation_id(),
            image_id: image_id.to_string(),
            polygon,
            provenance: Provenance::Manual,
            damage_label,
            author: actor.to_string(),
            stage: Stage::Qc2,
            created_at: now,
        });
        let event = Event::MissedDamageFlagged {
            image_id: image_id.to_string(),
            annotation: annotation.clone(),
            note,
        };
        self.append_for_image(image_id, actor, now, event)?;
        Ok(annotation)
    }

    /// Transition check ahead of building a payload, so rejections name the
    /// workflow problem rather than a payload detail.
    fn precheck(&self, image_id: &str, action: ImageAction) -> Result<()> {
        let img = self.state.image_state(image_id)?;
        let arm = self.state.jobs[&img.record.job_id].job.arm;
        workflow::transition(arm, img.state, action).map(|_| ())
    }

    pub fn export_annotations(&self, image_id: &str) -> Result<AnnotationExport> {
        let img = self.state.image_state(image_id)?;
        Ok(AnnotationExport { image_id: image_id.to_string(), annotations: img.annotations.clone() })
    }
}
