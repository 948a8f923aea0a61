//! Fixture builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use bladeqc::geometry::{Point2, Polygon};
use bladeqc::metrics::{EvalImage, EvalPrediction};
use bladeqc::store::{JobManifest, ManifestImage, PredictionEntry, PredictionFile, Stage, Store, StoreConfig};
use bladeqc::workflow::{assign_arm, Arm, DEFAULT_SALT};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ACTOR: &str = "analyst-1";

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// The first `n` ids of the form `{prefix}-{k}` that the default config routes to `arm`.
pub fn job_ids(arm: Arm, prefix: &str, n: usize) -> Vec<String> {
    (0..)
        .map(|k| format!("{prefix}-{k:05}"))
        .filter(|id| assign_arm(id, 0.8, DEFAULT_SALT).unwrap() == arm)
        .take(n)
        .collect()
}

pub fn manifest(job_id: &str, n_images: usize) -> JobManifest {
    JobManifest {
        job_id: job_id.to_string(),
        turbine_id: format!("WT-{}", job_id.len()),
        created_at: None,
        images: (0..n_images)
            .map(|k| ManifestImage {
                image_id: format!("{job_id}/img{k:02}"),
                file_ref: format!("s3://inspections/{job_id}/{k:02}.jpg"),
                native_resolution: None,
                working_resolution: None,
                metadata: BTreeMap::from([("blade".to_string(), ["A", "B", "C"][k % 3].to_string())]),
            })
            .collect(),
    }
}

pub fn rect_entry(id: &str, x: f64, y: f64, w: f64, h: f64, score: f64) -> PredictionEntry {
    PredictionEntry {
        id: id.to_string(),
        score,
        mask: None,
        polygon: Some(Polygon::rect(x, y, x + w, y + h).unwrap()),
        frame: Default::default(),
    }
}

/// Non-overlapping cells on a grid, row-major from `y0`.
fn cell(k: usize, y0: f64) -> (f64, f64) {
    (40.0 + (k % 40) as f64 * 130.0, y0 + (k / 40) as f64 * 90.0)
}

/// One treatment job with a single image whose QC1 yields `n_annotations`
/// annotations, `n_from_clues` of them from clues (every third one edited).
pub fn conversion_job(store: &mut Store, job_id: &str, n_annotations: usize, n_from_clues: usize, t0: i64) {
    store.ingest_job(&manifest(job_id, 1), "portal", t0).unwrap();
    let image = format!("{job_id}/img00");
    let file = PredictionFile {
        image_id: image.clone(),
        instances: (0..n_from_clues)
            .map(|k| {
                let (x, y) = cell(k, 40.0);
                rect_entry(&format!("p{k:03}"), x, y, 60.0, 40.0, 0.9)
            })
            .collect(),
    };
    let mut t = t0 + 1_000;
    store.ingest_predictions(&file, None, "model", t).unwrap();
    store.open_stage(&image, Stage::Qc1, ACTOR, t).unwrap();
    for k in 0..n_from_clues {
        t += 500;
        let edit = (k % 3 == 2).then(|| {
            let (x, y) = cell(k, 40.0);
            Polygon::rect(x + 2.0, y + 2.0, x + 58.0, y + 38.0).unwrap()
        });
        store.convert_clue(&image, &format!("clue-p{k:03}"), edit, None, ACTOR, t).unwrap();
    }
    for k in 0..n_annotations - n_from_clues {
        t += 500;
        let (x, y) = cell(k, 2000.0);
        let poly = Polygon::rect(x, y, x + 50.0, y + 30.0).unwrap();
        store.draw_annotation(&image, poly, Some("erosion".into()), ACTOR, t).unwrap();
    }
    store.close_stage(&image, Stage::Qc1, ACTOR, t + 500).unwrap();
    store.complete_stage(&image, Stage::Qc1, ACTOR, t + 600).unwrap();
}

pub const TABLE1: [(usize, usize); 5] = [(183, 178), (192, 184), (124, 124), (192, 184), (192, 184)];
pub const TABLE1_PCT: [&str; 5] = ["97.3", "95.8", "100", "95.8", "95.8"];

/// Builds the five Table 1 jobs; returns their ids in table order.
pub fn table1(store: &mut Store) -> Vec<String> {
    let ids = job_ids(Arm::Treatment, "table1", 5);
    for (k, (id, &(n, c))) in ids.iter().zip(TABLE1.iter()).enumerate() {
        conversion_job(store, id, n, c, 1_700_000_000_000 + k as i64 * 10_000_000);
    }
    ids
}

/// One job with a single image taken through both QC stages with the given
/// session lengths and number of missed-damage flags.
pub fn productivity_job(store: &mut Store, job_id: &str, qc1_ms: i64, qc2_ms: i64, missed: usize, t0: i64) {
    store.ingest_job(&manifest(job_id, 1), "portal", t0).unwrap();
    let image = format!("{job_id}/img00");
    let arm = store.state().job(job_id).unwrap().job.arm;
    if arm == Arm::Treatment {
        let file = PredictionFile { image_id: image.clone(), instances: vec![] };
        store.ingest_predictions(&file, None, "model", t0 + 10).unwrap();
    }
    let t = t0 + 1_000;
    store.open_stage(&image, Stage::Qc1, ACTOR, t).unwrap();
    store.close_stage(&image, Stage::Qc1, ACTOR, t + qc1_ms).unwrap();
    store.complete_stage(&image, Stage::Qc1, ACTOR, t + qc1_ms + 1).unwrap();
    let t = t + qc1_ms + 60_000;
    store.open_stage(&image, Stage::Qc2, "reviewer", t).unwrap();
    for m in 0..missed {
        let poly = Polygon::rect(100.0 + 50.0 * m as f64, 100.0, 140.0 + 50.0 * m as f64, 130.0).unwrap();
        store.flag_missed(&image, Some(poly), None, Some("tip crack".into()), "reviewer", t + 1 + m as i64).unwrap();
    }
    store.close_stage(&image, Stage::Qc2, "reviewer", t + qc2_ms).unwrap();
    store.complete_stage(&image, Stage::Qc2, "reviewer", t + qc2_ms + 1).unwrap();
}

/// Control: 125 pictures at 12.72 s / 5.4 s and one miss → (0.212, 0.090, 0.0080).
/// Treatment: 1250 pictures at 12.3 s / 5.16 s and nine misses → (0.205, 0.086, 0.0072).
pub fn table2(store: &mut Store) {
    let mut t = 1_700_000_000_000;
    for (k, id) in job_ids(Arm::Control, "t2c", 125).iter().enumerate() {
        productivity_job(store, id, 12_720, 5_400, usize::from(k == 0), t);
        t += 1_000_000;
    }
    for (k, id) in job_ids(Arm::Treatment, "t2t", 1250).iter().enumerate() {
        productivity_job(store, id, 12_300, 5_160, usize::from(k < 9), t);
        t += 1_000_000;
    }
}

pub fn in_memory() -> Store {
    Store::in_memory(StoreConfig::default())
}

/// Star-shaped (hence simple) polygon around `(cx, cy)`.
pub fn star_polygon(rng: &mut ChaCha8Rng, cx: f64, cy: f64, rmin: f64, rmax: f64, n: usize) -> Polygon {
    // Jittered but evenly spread angles keep every gap below pi, so the
    // polygon stays simple.
    let n = n.max(3);
    let angles: Vec<f64> = (0..n).map(|k| (k as f64 + 0.8 * rng.random::<f64>()) * TAU / n as f64).collect();
    let pts = angles
        .iter()
        .map(|&a| {
            let r = rng.random_range(rmin..=rmax);
            Point2::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    Polygon::new(pts).unwrap()
}

/// A random polygon fully inside a `w`×`h` frame: axis rect, rotated rect or star.
pub fn random_shape(rng: &mut ChaCha8Rng, w: f64, h: f64, max_r: f64) -> Polygon {
    let r = rng.random_range(4.0..max_r);
    let cx = rng.random_range(r..w - r);
    let cy = rng.random_range(r..h - r);
    match rng.random_range(0..3) {
        0 => {
            let (hw, hh) = (rng.random_range(2.0..=r), rng.random_range(2.0..=r));
            Polygon::rect(cx - hw, cy - hh, cx + hw, cy + hh).unwrap()
        }
        1 => {
            let a: f64 = rng.random::<f64>() * TAU;
            let (hw, hh) = (rng.random_range(2.0..=r) / 1.5, rng.random_range(2.0..=r) / 1.5);
            let (c, s) = (a.cos(), a.sin());
            let pts = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
                .iter()
                .map(|&(x, y)| Point2::new(cx + x * c - y * s, cy + x * s + y * c))
                .collect();
            Polygon::new(pts).unwrap()
        }
        _ => {
            let n = rng.random_range(3..12);
            star_polygon(rng, cx, cy, r * 0.3, r, n)
        }
    }
}

/// Random evaluation image; predictions are biased to land near ground truths
/// (jittered copies and fragments) so matching is exercised, not just misses.
pub fn random_eval_image(rng: &mut ChaCha8Rng, id: &str, size: u32, max_gts: usize, max_preds: usize) -> EvalImage {
    let s = f64::from(size);
    let n_gt = rng.random_range(1..=max_gts);
    let gts: Vec<Polygon> = (0..n_gt).map(|_| random_shape(rng, s, s, s / 6.0)).collect();
    let n_pred = rng.random_range(0..=max_preds);
    let predictions = (0..n_pred)
        .map(|k| {
            let g = &gts[rng.random_range(0..gts.len())];
            let poly = if rng.random_bool(0.7) {
                let b = g.aabb();
                let (bw, bh) = (b.width(), b.height());
                let x0 = (b.x_min + rng.random_range(-0.3..0.6) * bw).clamp(0.0, s - 3.0);
                let y0 = (b.y_min + rng.random_range(-0.3..0.6) * bh).clamp(0.0, s - 3.0);
                let x1 = (x0 + rng.random_range(0.3..1.2) * bw).clamp(x0 + 2.0, s);
                let y1 = (y0 + rng.random_range(0.3..1.2) * bh).clamp(y0 + 2.0, s);
                Polygon::rect(x0, y0, x1, y1).unwrap()
            } else {
                random_shape(rng, s, s, s / 6.0)
            };
            EvalPrediction::from_polygon(format!("{id}-p{k}"), poly).with_score(rng.random())
        })
        .collect();
    EvalImage { image_id: id.to_string(), width: size, height: size, ground_truths: gts, predictions }
}

/// 18 images, one 100×100 ground truth each. 17 get an exact prediction;
/// the 18th gets none. 25 extra predictions sit away from every ground
/// truth. Recall 17/18, precision 17/42.
pub fn headline_fixture() -> Vec<EvalImage> {
    let mut images = Vec::new();
    let mut spare = 25;
    for k in 0..18 {
        let gt = Polygon::rect(50.0, 50.0, 150.0, 150.0).unwrap();
        let mut predictions = Vec::new();
        if k < 17 {
            predictions.push(EvalPrediction::from_polygon(format!("img{k}-hit"), gt.clone()).with_score(0.9));
        }
        let extra = if k < 7 { 2 } else { 1 }.min(spare);
        for e in 0..extra {
            let x = 250.0 + 110.0 * e as f64;
            let fp = Polygon::rect(x, 300.0, x + 80.0, 380.0).unwrap();
            predictions.push(EvalPrediction::from_polygon(format!("img{k}-fp{e}"), fp).with_score(0.6));
        }
        spare -= extra;
        images.push(EvalImage { image_id: format!("img{k}"), width: 512, height: 512, ground_truths: vec![gt], predictions });
    }
    assert_eq!(spare, 0);
    images
}

/// Drives randomized but legal QC traffic into `store` until the journal
/// holds at least `min_events` events. Deterministic for a given seed.
pub fn synthetic_traffic(store: &mut Store, seed: u64, min_events: usize) {
    let mut rng = rng(seed);
    let mut t: i64 = 1_750_000_000_000;
    let mut job_no = 0;
    let count = |s: &Store| s.state().jobs.values().map(|j| j.events.len()).sum::<usize>();
    while count(store) < min_events {
        let job_id = format!("syn-{seed}-{job_no:05}");
        job_no += 1;
        let n_images = rng.random_range(1..=4);
        store.ingest_job(&manifest(&job_id, n_images), "portal", t).unwrap();
        let arm = store.state().job(&job_id).unwrap().job.arm;
        for k in 0..n_images {
            let image = format!("{job_id}/img{k:02}");
            t += rng.random_range(1..5_000);
            if arm == Arm::Treatment || rng.random_bool(0.5) {
                let n = rng.random_range(0..6);
                let file = PredictionFile {
                    image_id: image.clone(),
                    instances: (0..n)
                        .map(|i| {
                            let (x, y) = cell(i, 40.0 + 200.0 * k as f64);
                            let w = rng.random_range(10.0..100.0);
                            rect_entry(&format!("i{i}"), x, y, w, 30.0, rng.random())
                        })
                        .collect(),
                };
                store.ingest_predictions(&file, None, "model", t).unwrap();
            }
            // QC1, possibly split across sessions.
            let sessions = rng.random_range(1..=3);
            for s in 0..sessions {
                t += rng.random_range(1..60_000);
                store.open_stage(&image, Stage::Qc1, ACTOR, t).unwrap();
                if s == 0 {
                    let clue_ids: Vec<String> =
                        store.state().image_state(&image).unwrap().clues.iter().map(|c| c.id.clone()).collect();
                    for cid in clue_ids {
                        t += rng.random_range(1..10_000);
                        match rng.random_range(0..4) {
                            0 => {
                                store.dismiss_clue(&image, &cid, ACTOR, t).unwrap();
                            }
                            1 => {
                                let r = store.state().image_state(&image).unwrap().clue(&cid).unwrap().rect;
                                let p = r.to_polygon();
                                store.convert_clue(&image, &cid, Some(p), Some("crack".into()), ACTOR, t).unwrap();
                            }
                            2 => {}
                            _ => {
                                store.convert_clue(&image, &cid, None, None, ACTOR, t).unwrap();
                            }
                        }
                    }
                }
                for _ in 0..rng.random_range(0..3) {
                    t += rng.random_range(1..10_000);
                    let poly = random_shape(&mut rng, 5456.0, 3632.0, 200.0);
                    let a = store.draw_annotation(&image, poly, None, ACTOR, t).unwrap();
                    if rng.random_bool(0.3) {
                        let moved = random_shape(&mut rng, 5456.0, 3632.0, 200.0);
                        store.edit_annotation(&image, &a.annotation_id, moved, ACTOR, t + 1).unwrap();
                    }
                }
                t += rng.random_range(1..60_000);
                store.close_stage(&image, Stage::Qc1, ACTOR, t).unwrap();
            }
            store.complete_stage(&image, Stage::Qc1, ACTOR, t + 1).unwrap();
            if rng.random_bool(0.1) {
                continue; // left waiting for QC2
            }
            t += rng.random_range(1..60_000);
            store.open_stage(&image, Stage::Qc2, "reviewer", t).unwrap();
            let ids: Vec<String> = store
                .state()
                .image_state(&image)
                .unwrap()
                .annotations
                .iter()
                .map(|a| a.annotation_id.clone())
                .collect();
            for id in ids {
                if rng.random_bool(0.8) {
                    t += rng.random_range(1..3_000);
                    store.approve_annotation(&image, &id, "reviewer", t).unwrap();
                }
            }
            if rng.random_bool(0.05) {
                t += 1;
                store.flag_missed(&image, None, None, Some("missed".into()), "reviewer", t).unwrap();
            }
            t += rng.random_range(1..30_000);
            store.close_stage(&image, Stage::Qc2, "reviewer", t).unwrap();
            store.complete_stage(&image, Stage::Qc2, "reviewer", t + 1).unwrap();
        }
    }
}
