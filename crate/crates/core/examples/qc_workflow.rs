// One treatment-arm image through QC1 and QC2 on the event store.
//
//     cargo run --example qc_workflow

use bladeqc::geometry::Polygon;
use bladeqc::store::{JobManifest, ManifestImage, PredictionEntry, PredictionFile, Stage, Store, StoreConfig};
use bladeqc::workflow::{assign_arm, qc_durations, Arm, DEFAULT_SALT};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = Store::in_memory(StoreConfig::default());

    // Arms are assigned by hashing the job id; pick the first treatment job.
    let job_id = (0..)
        .map(|k| format!("WT12-{k:04}"))
        .find(|id| assign_arm(id, 0.8, DEFAULT_SALT).ok() == Some(Arm::Treatment))
        .unwrap();
    let image = format!("{job_id}/0001");
    let manifest = JobManifest {
        job_id: job_id.clone(),
        turbine_id: "WT12".into(),
        created_at: None,
        images: vec![ManifestImage {
            image_id: image.clone(),
            file_ref: "s3://inspections/WT12/0001.jpg".into(),
            native_resolution: None,
            working_resolution: None,
            metadata: Default::default(),
        }],
    };
    let t = 1_718_000_000_000;
    let (job, _) = store.ingest_job(&manifest, "portal", t)?;
    println!("job {} → {} arm", job.job_id, job.arm.as_str());

    let rect = |x0, y0, x1, y1| Polygon::rect(x0, y0, x1, y1);
    let preds = PredictionFile {
        image_id: image.clone(),
        instances: vec![
            PredictionEntry { id: "m0".into(), score: 0.88, mask: None, polygon: Some(rect(800.0, 900.0, 1400.0, 1010.0)?), frame: Default::default() },
            PredictionEntry { id: "m1".into(), score: 0.61, mask: None, polygon: Some(rect(3000.0, 200.0, 3100.0, 300.0)?), frame: Default::default() },
        ],
    };
    let clues = store.ingest_predictions(&preds, None, "model-v3", t + 1_000)?;
    println!("{} clues proposed", clues.len());

    // QC1: the analyst converts one clue as-is, rejects the other, draws a miss.
    store.open_stage(&image, Stage::Qc1, "ana", t + 60_000)?;
    let a = store.convert_clue(&image, "clue-m0", None, Some("leading-edge erosion".into()), "ana", t + 75_000)?;
    store.dismiss_clue(&image, "clue-m1", "ana", t + 80_000)?;
    store.draw_annotation(&image, rect(2000.0, 2000.0, 2100.0, 2050.0)?, Some("crack".into()), "ana", t + 95_000)?;
    store.close_stage(&image, Stage::Qc1, "ana", t + 120_000)?;
    store.complete_stage(&image, Stage::Qc1, "ana", t + 120_500)?;
    println!("converted {} with provenance {:?}", a.annotation_id, a.provenance);

    // QC2: a reviewer approves and flags one damage QC1 missed.
    store.open_stage(&image, Stage::Qc2, "rita", t + 600_000)?;
    store.approve_annotation(&image, &a.annotation_id, "rita", t + 610_000)?;
    store.flag_missed(&image, Some(rect(4100.0, 3000.0, 4200.0, 3080.0)?), None, Some("tip chip".into()), "rita", t + 620_000)?;
    store.close_stage(&image, Stage::Qc2, "rita", t + 630_000)?;
    let state = store.complete_stage(&image, Stage::Qc2, "rita", t + 630_500)?;

    // Illegal moves are refused and leave the journal untouched.
    let err = store.open_stage(&image, Stage::Qc1, "ana", t + 700_000).unwrap_err();
    println!("reopen QC1 after QC2: {err}");

    let events: Vec<_> = store.state().job(&job_id)?.image_events(&image).cloned().collect();
    let d = qc_durations(&events)?;
    println!("final state {}  QC1 {:.2} min  QC2 {:.2} min", state.as_str(), d.qc1_minutes, d.qc2_minutes);
    for e in &events {
        println!("  #{:<2} {:<9} {}", e.seq, e.actor, e.event.action_name());
    }
    let export = store.export_annotations(&image)?;
    println!("{} annotations exported", export.annotations.len());
    Ok(())
}
