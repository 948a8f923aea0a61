// Clue-conversion and arm-comparison dashboards from a simulated campaign.
//
//     cargo run --example dashboard_reports

use bladeqc::analytics::{arm_comparison, conversion_table, export_report, Report, ReportFormat};
use bladeqc::geometry::Polygon;
use bladeqc::store::{JobManifest, ManifestImage, PredictionEntry, PredictionFile, Stage, Store, StoreConfig};
use bladeqc::workflow::Arm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn manifest(job_id: &str, n: usize) -> JobManifest {
    JobManifest {
        job_id: job_id.into(),
        turbine_id: "WT03".into(),
        created_at: None,
        images: (0..n)
            .map(|k| ManifestImage {
                image_id: format!("{job_id}/{k:03}"),
                file_ref: format!("s3://bucket/{job_id}/{k:03}.jpg"),
                native_resolution: None,
                working_resolution: None,
                metadata: Default::default(),
            })
            .collect(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = Store::in_memory(StoreConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut t: i64 = 1_718_000_000_000;

    for j in 0..40 {
        let job_id = format!("campaign-{j:03}");
        let (job, _) = store.ingest_job(&manifest(&job_id, 3), "portal", t)?;
        for image in &job.image_ids {
            let n_pred = rng.random_range(0..5);
            if job.arm == Arm::Treatment {
                let instances = (0..n_pred)
                    .map(|k| {
                        let x = 200.0 + 900.0 * k as f64;
                        PredictionEntry {
                            id: format!("p{k}"),
                            score: rng.random_range(0.5..1.0),
                            mask: None,
                            polygon: Some(Polygon::rect(x, 500.0, x + 300.0, 620.0).unwrap()),
                            frame: Default::default(),
                        }
                    })
                    .collect();
                store.ingest_predictions(&PredictionFile { image_id: image.clone(), instances }, None, "model", t)?;
            }
            // Analysts are a little quicker with clues.
            let qc1_ms = if job.arm == Arm::Treatment { rng.random_range(9_000..14_000) } else { rng.random_range(10_000..15_000) };
            store.open_stage(image, Stage::Qc1, "ana", t + 1_000)?;
            if job.arm == Arm::Treatment {
                for k in 0..n_pred {
                    if rng.random_bool(0.9) {
                        store.convert_clue(image, &format!("clue-p{k}"), None, None, "ana", t + 2_000)?;
                    } else {
                        store.dismiss_clue(image, &format!("clue-p{k}"), "ana", t + 2_000)?;
                    }
                }
            }
            if rng.random_bool(0.3) {
                store.draw_annotation(image, Polygon::rect(100.0, 3000.0, 180.0, 3050.0)?, None, "ana", t + 3_000)?;
            }
            store.close_stage(image, Stage::Qc1, "ana", t + 1_000 + qc1_ms)?;
            store.complete_stage(image, Stage::Qc1, "ana", t + 1_001 + qc1_ms)?;
            store.open_stage(image, Stage::Qc2, "rita", t + 100_000)?;
            if rng.random_bool(0.05) {
                store.flag_missed(image, None, None, Some("missed chip".into()), "rita", t + 100_500)?;
            }
            store.close_stage(image, Stage::Qc2, "rita", t + 100_000 + rng.random_range(4_000..6_000))?;
            store.complete_stage(image, Stage::Qc2, "rita", t + 110_000)?;
            t += 1_000_000;
        }
    }

    let state = store.state();
    let treated = state.jobs.values().filter(|j| j.job.arm == Arm::Treatment).take(6);
    let conversion = Report::Conversion(conversion_table(treated)?);
    print!("{}", export_report(&conversion, ReportFormat::Tabular));
    println!();
    let comparison = Report::Comparison(arm_comparison(state.jobs.values())?);
    print!("{}", export_report(&comparison, ReportFormat::Tabular));
    println!();
    println!("{}", export_report(&comparison, ReportFormat::Structured));
    Ok(())
}
