//! Command-line front end. [`run`] is the whole program minus process exit,
//! so it can be driven from tests.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analytics::{self, export_report, Report, ReportFormat};
use crate::error::{Error, Result};
use crate::metrics::EvalRequest;
use crate::store::{JobManifest, PredictionFile, Store, StoreConfig};
use crate::workflow::Arm;

#[derive(Debug, Parser)]
#[command(name = "bladeqc", version, about = "Blade inspection QC: clues, damage metrics, QC workflow and reports")]
pub struct Cli {
    /// Directory holding the event journal.
    #[arg(long, global = true, default_value = "bladeqc-data", env = "BLADEQC_DATA_DIR")]
    pub data_dir: PathBuf,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tabular)]
    pub format: Format,

    /// Actor recorded on journal events.
    #[arg(long, global = true, default_value = "cli")]
    pub actor: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Structured,
    Tabular,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Structured => ReportFormat::Structured,
            Format::Tabular => ReportFormat::Tabular,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register an inspection job from a manifest file.
    Ingest { manifest: PathBuf },
    /// Ingest a prediction file (one document or a list) and generate clues.
    Predictions {
        file: PathBuf,
        #[arg(long)]
        score_threshold: Option<f64>,
    },
    /// List the clues of an image.
    Clues { image: String },
    /// Damage-level recall/precision over an evaluation file.
    Eval {
        file: PathBuf,
        #[arg(long)]
        iou_threshold: Option<f64>,
        #[arg(long)]
        score_threshold: Option<f64>,
    },
    /// Dashboard reports.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Static assets served under /ui.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Rebuild state from a journal file and print a summary.
    Replay { journal: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum ReportKind {
    /// Clue conversion per job.
    Conversion {
        #[arg(long)]
        job: Vec<String>,
    },
    /// Per-picture QC minutes and misses per inspection for one arm.
    Productivity {
        #[arg(long)]
        arm: String,
    },
    /// Control vs treatment with deltas.
    Comparison,
}

fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, data: &T, text: impl FnOnce() -> String) -> Result<()> {
    match format {
        Format::Structured => writeln!(out, "{}", serde_json::to_string_pretty(data)?)?,
        Format::Tabular => write!(out, "{}", text())?,
    }
    Ok(())
}

fn open_store(cli: &Cli) -> Result<Store> {
    Store::open(&cli.data_dir, StoreConfig::default())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ingest { manifest } => {
            let manifest: JobManifest = serde_json::from_str(&read(manifest)?)?;
            let mut store = open_store(cli)?;
            let (job, created) = store.ingest_job(&manifest, &cli.actor, now_ms())?;
            emit(out, cli.format, &json!({ "job": job, "created": created }), || {
                format!(
                    "job {} arm={} images={} {}\n",
                    job.job_id,
                    job.arm.as_str(),
                    job.image_ids.len(),
                    if created { "created" } else { "already ingested" }
                )
            })
        }
        Command::Predictions { file, score_threshold } => {
            let doc = read(file)?;
            let files: Vec<PredictionFile> = if doc.trim_start().starts_with('[') {
                serde_json::from_str(&doc)?
            } else {
                vec![serde_json::from_str(&doc)?]
            };
            let mut store = open_store(cli)?;
            let mut results = Vec::new();
            for f in &files {
                let clues = store.ingest_predictions(f, *score_threshold, &cli.actor, now_ms())?;
                results.push((f.image_id.clone(), f.instances.len(), clues));
            }
            let data: Vec<_> = results
                .iter()
                .map(|(id, _, clues)| json!({ "image_id": id, "clues": clues }))
                .collect();
            emit(out, cli.format, &data, || {
                results
                    .iter()
                    .map(|(id, n, clues)| format!("{id}: {n} instances, {} clues\n", clues.len()))
                    .collect()
            })
        }
        Command::Clues { image } => {
            let store = open_store(cli)?;
            let clues = &store.state().image_state(image)?.clues;
            emit(out, cli.format, clues, || {
                let mut s = format!("{:<24} {:>6} {:>10} {:>10} {:>7}  {}\n", "clue", "score", "width", "height", "angle", "status");
                for c in clues {
                    s += &format!(
                        "{:<24} {:>6.3} {:>10.1} {:>10.1} {:>7.2}  {:?}\n",
                        c.id,
                        c.score,
                        c.rect.width(),
                        c.rect.height(),
                        c.rect.angle(),
                        c.status
                    );
                }
                s
            })
        }
        Command::Eval { file, iou_threshold, score_threshold } => {
            let mut req = EvalRequest::from_json(&read(file)?)?;
            if iou_threshold.is_some() {
                req.iou_threshold = *iou_threshold;
            }
            if score_threshold.is_some() {
                req.score_threshold = *score_threshold;
            }
            let report = req.evaluate()?;
            write!(out, "{}", export_report(&Report::Metrics(report), cli.format.into()))?;
            Ok(())
        }
        Command::Report { kind } => {
            let store = open_store(cli)?;
            let state = store.state();
            let report = match kind {
                ReportKind::Conversion { job } if job.is_empty() => Report::Conversion(analytics::conversion_table(
                    state.jobs.values().filter(|j| j.images.values().all(|i| i.state.qc1_completed())),
                )?),
                ReportKind::Conversion { job } => Report::Conversion(analytics::conversion_table(
                    job.iter().map(|id| state.job(id)).collect::<Result<Vec<_>>>()?,
                )?),
                ReportKind::Productivity { arm } => {
                    let arm: Arm = arm.parse()?;
                    Report::Productivity(analytics::productivity_report(state.jobs.values(), arm)?)
                }
                ReportKind::Comparison => Report::Comparison(analytics::arm_comparison(state.jobs.values())?),
            };
            write!(out, "{}", export_report(&report, cli.format.into()))?;
            Ok(())
        }
        Command::Serve { port, host, ui_dir } => {
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .try_init();
            let store = open_store(cli)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(SocketAddr::new(*host, *port), store, ui_dir.clone()))?;
            Ok(())
        }
        Command::Replay { journal } => {
            let store = Store::from_journal(journal, StoreConfig::default())?;
            let state = store.state();
            let digest = Sha256::digest(state.canonical_json().as_bytes());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            let events: usize = state.jobs.values().map(|j| j.events.len()).sum();
            let summary = json!({
                "jobs": state.jobs.len(),
                "images": state.image_jobs.len(),
                "events": events,
                "state_sha256": hex,
            });
            emit(out, cli.format, &summary, || {
                format!(
                    "jobs {}\nimages {}\nevents {events}\nstate_sha256 {hex}\n",
                    state.jobs.len(),
                    state.image_jobs.len()
                )
            })
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    1
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}
