//! Dashboards over the journal: clue conversion per job and per-picture QC
//! productivity per A/B arm.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::store::JobState;
use crate::workflow::{qc_durations, Arm, EventRecord, WorkflowState};

/// Averages divide global totals by global counts (not a mean of per-job means).
pub const WEIGHTING: &str = "global_per_picture";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionRow {
    pub job_id: String,
    pub n_annotations: u64,
    /// Annotations with `clue_converted` or `clue_modified` provenance.
    pub n_from_clues: u64,
    /// Percentage rounded half-up to one decimal; absent for jobs without annotations.
    pub pct_converted: Option<f64>,
}

impl ConversionRow {
    pub fn new(job_id: impl Into<String>, n_annotations: u64, n_from_clues: u64) -> Result<Self> {
        if n_from_clues > n_annotations {
            return Err(Error::invalid(format!(
                "{n_from_clues} clue annotations exceed {n_annotations} total"
            )));
        }
        Ok(Self {
            job_id: job_id.into(),
            n_annotations,
            n_from_clues,
            pct_converted: pct_tenths(n_from_clues, n_annotations).map(|t| t as f64 / 10.0),
        })
    }

    /// "97.3", "100" — the form used in the dashboard table.
    pub fn pct_display(&self) -> Option<String> {
        pct_tenths(self.n_from_clues, self.n_annotations).map(format_tenths)
    }
}

/// `100 * part / whole` in tenths of a percent, rounded half-up, in integers.
fn pct_tenths(part: u64, whole: u64) -> Option<u64> {
    (whole > 0).then(|| (2000 * part + whole) / (2 * whole))
}

fn format_tenths(t: u64) -> String {
    if t % 10 == 0 {
        format!("{}", t / 10)
    } else {
        format!("{}.{}", t / 10, t % 10)
    }
}

/// One row per job, in input order. Every image must have completed QC1.
pub fn conversion_table<'a>(jobs: impl IntoIterator<Item = &'a JobState>) -> Result<Vec<ConversionRow>> {
    jobs.into_iter()
        .map(|job| {
            if let Some(img) = job.images.values().find(|i| !i.state.qc1_completed()) {
                return Err(Error::invalid(format!(
                    "job {}: image {} is still {}; conversion needs QC1 complete",
                    job.job.job_id,
                    img.record.image_id,
                    img.state.as_str()
                )));
            }
            let anns = job.images.values().flat_map(|i| &i.annotations);
            let (n, from) = anns.fold((0, 0), |(n, c), a| (n + 1, c + u64::from(a.provenance.is_from_clue())));
            ConversionRow::new(job.job.job_id.clone(), n, from)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductivityReport {
    pub arm: Arm,
    pub weighting: String,
    pub n_inspections: u64,
    pub n_pictures: u64,
    /// Jobs of this arm left out because QC2 is not finished on every image.
    pub n_in_progress: u64,
    pub total_qc1_ms: i64,
    pub total_qc2_ms: i64,
    pub total_missed: u64,
    pub avg_qc1_min_per_picture: f64,
    pub avg_qc2_min_per_picture: f64,
    pub avg_missed_per_inspection: f64,
}

impl ProductivityReport {
    fn from_totals(arm: Arm, jobs: u64, pictures: u64, in_progress: u64, qc1: i64, qc2: i64, missed: u64) -> Self {
        let per_pic = |ms: i64| ms as f64 / 60_000.0 / pictures as f64;
        Self {
            arm,
            weighting: WEIGHTING.to_string(),
            n_inspections: jobs,
            n_pictures: pictures,
            n_in_progress: in_progress,
            total_qc1_ms: qc1,
            total_qc2_ms: qc2,
            total_missed: missed,
            avg_qc1_min_per_picture: per_pic(qc1),
            avg_qc2_min_per_picture: per_pic(qc2),
            avg_missed_per_inspection: missed as f64 / jobs as f64,
        }
    }

    /// Pools two reports over disjoint job sets of the same arm.
    pub fn combine(&self, other: &ProductivityReport) -> Result<ProductivityReport> {
        if self.arm != other.arm {
            return Err(Error::invalid("cannot pool reports from different arms"));
        }
        Ok(Self::from_totals(
            self.arm,
            self.n_inspections + other.n_inspections,
            self.n_pictures + other.n_pictures,
            self.n_in_progress + other.n_in_progress,
            self.total_qc1_ms + other.total_qc1_ms,
            self.total_qc2_ms + other.total_qc2_ms,
            self.total_missed + other.total_missed,
        ))
    }
}

/// Per-picture QC minutes and misses per inspection over the finished jobs of `arm`.
pub fn productivity_report<'a>(jobs: impl IntoIterator<Item = &'a JobState>, arm: Arm) -> Result<ProductivityReport> {
    let (mut n_jobs, mut n_pics, mut in_progress) = (0u64, 0u64, 0u64);
    let (mut qc1, mut qc2, mut missed) = (0i64, 0i64, 0u64);
    for job in jobs.into_iter().filter(|j| j.job.arm == arm) {
        if !job.all_images_at_least(WorkflowState::Qc2Done) {
            in_progress += 1;
            continue;
        }
        n_jobs += 1;
        for (image_id, img) in &job.images {
            let events: Vec<EventRecord> = job.image_events(image_id).cloned().collect();
            let d = qc_durations(&events)?;
            qc1 += d.qc1_ms;
            qc2 += d.qc2_ms;
            missed += u64::from(img.missed_damages);
            n_pics += 1;
        }
    }
    if n_jobs == 0 {
        return Err(Error::invalid(format!("no finished {} jobs to report on", arm.as_str())));
    }
    Ok(ProductivityReport::from_totals(arm, n_jobs, n_pics, in_progress, qc1, qc2, missed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductivityDelta {
    pub qc1_min_per_picture: f64,
    pub qc2_min_per_picture: f64,
    pub missed_per_inspection: f64,
}

/// Treatment minus control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmComparison {
    pub control: ProductivityReport,
    pub treatment: ProductivityReport,
    pub delta: ProductivityDelta,
}

pub fn arm_comparison<'a, I>(jobs: I) -> Result<ArmComparison>
where
    I: IntoIterator<Item = &'a JobState>,
    I::IntoIter: Clone,
{
    let jobs = jobs.into_iter();
    let control = productivity_report(jobs.clone(), Arm::Control)?;
    let treatment = productivity_report(jobs, Arm::Treatment)?;
    Ok(compare(control, treatment))
}

pub fn compare(control: ProductivityReport, treatment: ProductivityReport) -> ArmComparison {
    let delta = ProductivityDelta {
        qc1_min_per_picture: treatment.avg_qc1_min_per_picture - control.avg_qc1_min_per_picture,
        qc2_min_per_picture: treatment.avg_qc2_min_per_picture - control.avg_qc2_min_per_picture,
        missed_per_inspection: treatment.avg_missed_per_inspection - control.avg_missed_per_inspection,
    };
    ArmComparison { control, treatment, delta }
}

/// Anything the CLI or API can export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "report", rename_all = "snake_case")]
pub enum Report {
    Conversion(Vec<ConversionRow>),
    Productivity(ProductivityReport),
    Comparison(ArmComparison),
    Metrics(MetricsReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    /// JSON mirroring the report types; round-trips through [`parse_report`].
    #[default]
    Structured,
    /// Fixed-width text with the dashboard's column headings.
    Tabular,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" => Ok(ReportFormat::Structured),
            "tabular" => Ok(ReportFormat::Tabular),
            other => Err(Error::invalid(format!(
                "unknown report format `{other}` (expected structured or tabular)"
            ))),
        }
    }
}

const TABLE1: [&str; 4] = ["Job No.", "No. of annotations", "No. of clues converted", "% of clues converted"];
const TABLE2: [&str; 4] = [
    "Clues Used (yes/no)",
    "Average QC1 minutes (per picture)",
    "Average QC2 minutes (per picture)",
    "Average number of missed damages (per inspection)",
];

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(k, h)| rows.iter().map(|r| r[k].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

fn productivity_row(label: &str, r: &ProductivityReport) -> Vec<String> {
    vec![
        label.to_string(),
        format!("{:.3}", r.avg_qc1_min_per_picture),
        format!("{:.3}", r.avg_qc2_min_per_picture),
        format!("{:.4}", r.avg_missed_per_inspection),
    ]
}

fn arm_label(arm: Arm) -> &'static str {
    match arm {
        Arm::Control => "no",
        Arm::Treatment => "yes",
    }
}

pub fn export_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        ReportFormat::Tabular => match report {
            Report::Conversion(rows) => {
                let rows: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.job_id.clone(),
                            r.n_annotations.to_string(),
                            r.n_from_clues.to_string(),
                            r.pct_display().map_or_else(|| "-".to_string(), |p| format!("{p}%")),
                        ]
                    })
                    .collect();
                table(&TABLE1, &rows)
            }
            Report::Productivity(r) => table(&TABLE2, &[productivity_row(arm_label(r.arm), r)]),
            Report::Comparison(c) => {
                let d = &c.delta;
                let delta = vec![
                    "delta".to_string(),
                    format!("{:+.3}", d.qc1_min_per_picture),
                    format!("{:+.3}", d.qc2_min_per_picture),
                    format!("{:+.4}", d.missed_per_inspection),
                ];
                table(
                    &TABLE2,
                    &[productivity_row("no", &c.control), productivity_row("yes", &c.treatment), delta],
                )
            }
            Report::Metrics(m) => {
                let mut out = String::new();
                let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.2}%", v * 100.0));
                let _ = writeln!(out, "iou_threshold       {}", m.iou_threshold);
                let _ = writeln!(out, "images              {}", m.n_images);
                let _ = writeln!(out, "ground_truths       {} ({} matched)", m.n_ground_truths, m.tp_ground_truths);
                let _ = writeln!(out, "predictions         {} ({} true positive)", m.n_predictions, m.tp_predictions);
                let _ = writeln!(out, "damage_recall       {}", opt(m.damage_recall));
                let _ = writeln!(out, "damage_precision    {}", opt(m.damage_precision));
                let _ = writeln!(out, "shared_predictions  {}", m.shared_predictions);
                out
            }
        },
    }
}

/// Inverse of the structured export.
pub fn parse_report(doc: &str) -> Result<Report> {
    Ok(serde_json::from_str(doc)?)
}
