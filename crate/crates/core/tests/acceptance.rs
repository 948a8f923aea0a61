//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use bladeqc::analytics::{self, export_report, Report, ReportFormat};
use bladeqc::geometry::{convex_hull, convex_intersection_area, iou, min_area_rect, Point2, Polygon};
use bladeqc::mask::{rle_decode, rle_encode, BitMask};
use bladeqc::metrics::{best_subset_oracle, evaluate_dataset, match_image, threshold_sweep};
use bladeqc::service::{router, AppState};
use bladeqc::store::{Stage, Store, StoreConfig};
use bladeqc::workflow::{assign_arm, transition, transition_table, Arm, ImageAction, WorkflowState};
use bladeqc::Error;
use http_body_util::BodyExt;
use rand::Rng;
use tower::ServiceExt;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn table1_reproduction() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ids = {
        let mut store = Store::open(dir.path(), StoreConfig::default()).map_err(|e| e.to_string())?;
        common::table1(&mut store)
    };
    let mut args = vec!["bladeqc".to_string(), "--data-dir".into(), dir.path().display().to_string()];
    args.extend(["report".into(), "conversion".into()]);
    for id in &ids {
        args.extend(["--job".into(), id.clone()]);
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = bladeqc::cli::run(args, &mut out, &mut err);
    let out = String::from_utf8(out).unwrap();
    ensure!(code == 0, "exit {code}: {}", String::from_utf8_lossy(&err));
    let pcts: Vec<&str> = out.lines().skip(2).filter_map(|l| l.split_whitespace().last()).collect();
    let want: Vec<String> = common::TABLE1_PCT.iter().map(|p| format!("{p}%")).collect();
    ensure!(pcts == want, "got {pcts:?}, want {want:?}\n{out}");
    Ok(pcts.join(" "))
}

fn table2_reproduction() -> Check {
    let mut store = common::in_memory();
    common::table2(&mut store);
    let jobs = store.state().jobs.values();
    let fmt = |r: &analytics::ProductivityReport| {
        (
            format!("{:.3}", r.avg_qc1_min_per_picture),
            format!("{:.3}", r.avg_qc2_min_per_picture),
            format!("{:.4}", r.avg_missed_per_inspection),
        )
    };
    let control = analytics::productivity_report(jobs.clone(), Arm::Control).map_err(|e| e.to_string())?;
    let treatment = analytics::productivity_report(jobs.clone(), Arm::Treatment).map_err(|e| e.to_string())?;
    let c = fmt(&control);
    let t = fmt(&treatment);
    ensure!(c == ("0.212".into(), "0.090".into(), "0.0080".into()), "control {c:?}");
    ensure!(t == ("0.205".into(), "0.086".into(), "0.0072".into()), "treatment {t:?}");
    let cmp = analytics::arm_comparison(jobs).map_err(|e| e.to_string())?;
    let d = (
        format!("{:.3}", cmp.delta.qc1_min_per_picture),
        format!("{:.3}", cmp.delta.qc2_min_per_picture),
        format!("{:.4}", cmp.delta.missed_per_inspection),
    );
    ensure!(d == ("-0.007".into(), "-0.004".into(), "-0.0008".into()), "deltas {d:?}");
    Ok(format!("control {c:?} treatment {t:?} delta {d:?}"))
}

fn oracle_equivalence() -> Check {
    let mut rng = common::rng(0x0AC1E);
    let thresholds = [0.1, 0.3, 0.5, 0.7, 0.9];
    let (mut gts, mut matched) = (0, 0);
    for k in 0..200 {
        let img = common::random_eval_image(&mut rng, &format!("r{k}"), 512, 6, 10);
        for &t in &thresholds {
            let m = match_image(&img, t).map_err(|e| e.to_string())?;
            for g in &m.ground_truths {
                ensure!(
                    g.union_iou + 1e-12 >= g.best_single_iou,
                    "image {k} gt {}: union {} < single {}",
                    g.index,
                    g.union_iou,
                    g.best_single_iou
                );
                if t == 0.3 {
                    gts += 1;
                }
                if g.matched {
                    let o = best_subset_oracle(&img.ground_truths[g.index], &img.predictions, 512, 512)
                        .map_err(|e| e.to_string())?;
                    ensure!(o.union_iou >= t, "image {k} gt {} matched by greedy at {t}, oracle {}", g.index, o.union_iou);
                    ensure!(o.union_iou + 1e-12 >= g.union_iou, "greedy {} beats oracle {}", g.union_iou, o.union_iou);
                    if t == 0.3 {
                        matched += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{gts} ground truths, {matched} greedy matches at t=0.3 all confirmed"))
}

fn headline_shape() -> Check {
    let r = evaluate_dataset(&common::headline_fixture(), 0.3).map_err(|e| e.to_string())?;
    let recall = format!("{:.1}", r.damage_recall.unwrap_or(0.0) * 100.0);
    let precision = format!("{:.2}", r.damage_precision.unwrap_or(0.0) * 100.0);
    ensure!(r.n_ground_truths == 18 && r.tp_ground_truths == 17, "gt counts {r:?}");
    ensure!(r.n_predictions == 42 && r.tp_predictions == 17, "prediction counts {r:?}");
    ensure!(recall == "94.4" && precision == "40.48", "recall {recall} precision {precision}");
    Ok(format!("recall {recall}% precision {precision}%"))
}

fn threshold_monotonicity() -> Check {
    let mut rng = common::rng(0x50_7EE9);
    let ts = [0.1, 0.3, 0.5, 0.7, 0.9];
    for d in 0..50 {
        let n = rng.random_range(1..=8);
        let images: Vec<_> =
            (0..n).map(|k| common::random_eval_image(&mut rng, &format!("d{d}i{k}"), 256, 5, 8)).collect();
        let sweep = threshold_sweep(&images, &ts).map_err(|e| e.to_string())?;
        let recalls: Vec<f64> = sweep.iter().map(|(_, r)| r.damage_recall.unwrap()).collect();
        ensure!(recalls.windows(2).all(|w| w[0] >= w[1]), "dataset {d}: {recalls:?}");
    }
    Ok("50 datasets non-increasing".into())
}

/// Area of the bounding rectangle aligned with angle `th`.
fn oriented_area(pts: &[Point2], th: f64) -> f64 {
    let (c, s) = (th.cos(), th.sin());
    let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        let u = p.x * c + p.y * s;
        let v = -p.x * s + p.y * c;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    (u1 - u0) * (v1 - v0)
}

/// Dense 0.05° sweep over [0°, 90°), then golden-section refinement inside
/// the brackets of the best coarse local minima. Returns (coarse, refined).
fn sweep_oracle(pts: &[Point2]) -> (f64, f64) {
    const STEPS: usize = 1800;
    let step = FRAC_PI_2 / STEPS as f64;
    let areas: Vec<f64> = (0..STEPS).map(|i| oriented_area(pts, i as f64 * step)).collect();
    let coarse = areas.iter().copied().fold(f64::MAX, f64::min);
    let mut minima: Vec<usize> = (0..STEPS)
        .filter(|&i| areas[i] <= areas[(i + STEPS - 1) % STEPS] && areas[i] <= areas[(i + 1) % STEPS])
        .collect();
    minima.sort_by(|&a, &b| areas[a].total_cmp(&areas[b]));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = coarse;
    for &i in minima.iter().take(8) {
        let (mut a, mut b) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let (mut f1, mut f2) = (oriented_area(pts, x1), oriented_area(pts, x2));
        while b - a > 1e-11 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = oriented_area(pts, x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = oriented_area(pts, x2);
            }
        }
        best = best.min(f1).min(f2);
    }
    (coarse, best)
}

fn rotating_calipers() -> Check {
    let mut rng = common::rng(0xCA11);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(5..=50);
        let (rx, ry) = (rng.random_range(10.0..1500.0), rng.random_range(10.0..1500.0));
        let rot: f64 = rng.random::<f64>() * TAU;
        let (cx, cy) = (rng.random_range(1600.0..3800.0), rng.random_range(1600.0..2000.0));
        let pts: Vec<Point2> = (0..n)
            .map(|_| {
                let a: f64 = rng.random::<f64>() * TAU;
                let (x, y) = (rx * a.cos(), ry * a.sin());
                Point2::new(cx + x * rot.cos() - y * rot.sin(), cy + x * rot.sin() + y * rot.cos())
            })
            .collect();
        let Ok(hull) = convex_hull(&pts) else { continue };
        if !(5..=50).contains(&hull.vertices().len()) {
            continue;
        }
        done += 1;
        let rect = min_area_rect(&hull);
        let bbox = hull.aabb().area();
        let (coarse, refined) = sweep_oracle(hull.vertices());
        ensure!(rect.area() <= bbox * (1.0 + 1e-12), "hull {done}: rect {} > aabb {bbox}", rect.area());
        ensure!(rect.area() <= coarse * (1.0 + 1e-12), "hull {done}: rect {} > sweep {coarse}", rect.area());
        let rel = (rect.area() - refined).abs() / refined;
        ensure!(rel <= 1e-6, "hull {done}: rect {} vs sweep {refined} (rel {rel:e})", rect.area());
        worst = worst.max(rel);
    }
    Ok(format!("1000 hulls, worst relative gap {worst:.2e}"))
}

fn convex_pair(rng: &mut rand_chacha::ChaCha8Rng, cx: f64, cy: f64) -> Polygon {
    let rot: f64 = rng.random::<f64>() * TAU;
    let pts: Vec<Point2> = if rng.random_bool(0.5) {
        let (w, h) = (rng.random_range(64.0..700.0), rng.random_range(64.0..700.0));
        [(-w, -h), (w, -h), (w, h), (-w, h)].iter().map(|&(x, y)| (x / 2.0, y / 2.0)).collect::<Vec<_>>()
    } else {
        let n = rng.random_range(5..16);
        let (rx, ry) = (rng.random_range(40.0..400.0), rng.random_range(40.0..400.0));
        (0..n).map(|k| {
            let a = k as f64 * TAU / n as f64;
            (rx * a.cos(), ry * a.sin())
        })
        .collect()
    }
    .into_iter()
    .map(|(x, y)| Point2::new(cx + x * rot.cos() - y * rot.sin(), cy + x * rot.sin() + y * rot.cos()))
    .collect();
    Polygon::new(pts).unwrap()
}

fn raster_vs_exact() -> Check {
    let mut rng = common::rng(0x1A57E2);
    let mut worst: f64 = 0.0;
    for k in 0..300 {
        let (cx, cy) = (rng.random_range(800.0..4656.0), rng.random_range(800.0..2832.0));
        let a = convex_pair(&mut rng, cx, cy);
        let (dx, dy) = (rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
        let b = convex_pair(&mut rng, cx + dx, cy + dy);
        let inter = convex_intersection_area(&a, &b).map_err(|e| e.to_string())?;
        let exact = inter / (a.area() + b.area() - inter);
        let raster = iou(&a, &b, 5456, 3632).map_err(|e| e.to_string())?;
        let diff = (raster - exact).abs();
        ensure!(diff <= 0.02, "pair {k}: raster {raster} exact {exact}");
        worst = worst.max(diff);
    }
    Ok(format!("300 pairs, worst |diff| {worst:.5}"))
}

fn rle_codec() -> Check {
    let mut rng = common::rng(0x41E);
    for k in 0..1000 {
        let (w, h) = (rng.random_range(1..=256u32), rng.random_range(1..=256u32));
        let n = (w * h) as usize;
        let bits: Vec<bool> = match k {
            0 => vec![false; n],
            1 => vec![true; n],
            _ if k % 3 == 0 => {
                // Blocky masks: long runs.
                let mut v = Vec::with_capacity(n);
                let mut on = rng.random_bool(0.5);
                while v.len() < n {
                    let run = rng.random_range(1..=3 * w as usize);
                    v.extend(std::iter::repeat_n(on, run.min(n - v.len())));
                    on = !on;
                }
                v
            }
            _ => {
                let p: f64 = rng.random();
                (0..n).map(|_| rng.random_bool(p)).collect()
            }
        };
        let m = BitMask::from_bits(w, h, bits).map_err(|e| e.to_string())?;
        let r = rle_encode(&m);
        ensure!(r.counts.iter().map(|&c| u64::from(c)).sum::<u64>() == n as u64, "mask {k}: counts sum");
        ensure!(r.counts.iter().skip(1).all(|&c| c > 0), "mask {k}: zero-length interior run");
        let back = rle_decode(&r).map_err(|e| e.to_string())?;
        ensure!(back == m, "mask {k} ({w}x{h}) failed round trip");
    }
    Ok("1000 masks round-trip (incl. all-0 and all-1)".into())
}

fn ab_assignment() -> Check {
    let ids: Vec<String> = (0..10_000).map(|k| format!("inspection-{k:05}")).collect();
    let salt = bladeqc::workflow::DEFAULT_SALT;
    let arms: Vec<Arm> = ids.iter().map(|id| assign_arm(id, 0.8, salt).unwrap()).collect();
    let again: Vec<Arm> = ids.iter().map(|id| assign_arm(id, 0.8, salt).unwrap()).collect();
    ensure!(arms == again, "assignment not reproducible");
    let frac = arms.iter().filter(|&&a| a == Arm::Control).count() as f64 / ids.len() as f64;
    ensure!((0.78..=0.82).contains(&frac), "control fraction {frac}");
    ensure!(assign_arm("x", 1.0, salt).is_err(), "ratio 1.0 accepted");
    Ok(format!("control fraction {frac:.4}"))
}

/// The allowed moves, written out independently of the implementation.
fn expected(arm: Arm, s: WorkflowState, a: ImageAction) -> Option<WorkflowState> {
    use ImageAction as A;
    use WorkflowState as S;
    let treatment = arm == Arm::Treatment;
    Some(match (s, a) {
        (S::Ingested, A::PredictionsIngested) => S::Predicted,
        (S::Ingested, A::Qc1Open) if !treatment => S::Qc1Open,
        (S::Predicted, A::Qc1Open) => S::Qc1Open,
        (S::Qc1Open, A::ClueConverted | A::ClueModified | A::ClueDismissed) if treatment => S::Qc1Open,
        (S::Qc1Open, A::AnnotationDrawn | A::AnnotationEdited) => S::Qc1Open,
        (S::Qc1Open, A::Qc1Close) => S::Qc1Paused,
        (S::Qc1Paused, A::Qc1Open) => S::Qc1Open,
        (S::Qc1Paused, A::Qc1Complete) => S::Qc1Done,
        (S::Qc1Done, A::Qc2Open) => S::Qc2Open,
        (S::Qc2Open, A::AnnotationApproved | A::MissedDamageFlagged | A::AnnotationDrawn | A::AnnotationEdited) => {
            S::Qc2Open
        }
        (S::Qc2Open, A::Qc2Close) => S::Qc2Paused,
        (S::Qc2Paused, A::Qc2Open) => S::Qc2Open,
        (S::Qc2Paused, A::Qc2Complete) => S::Qc2Done,
        _ => return None,
    })
}

fn workflow_legality() -> Check {
    let mut rejected = 0;
    for arm in Arm::ALL {
        for s in WorkflowState::ALL {
            for a in ImageAction::ALL {
                let got = transition(arm, s, a);
                match (expected(arm, s, a), got) {
                    (Some(want), Ok(next)) => ensure!(want == next, "{arm:?} {s:?} {a:?}: {next:?} != {want:?}"),
                    (None, Err(Error::IllegalTransition { .. })) => rejected += 1,
                    (None, Err(Error::Rejected(_))) if arm == Arm::Control && a.is_clue_action() => rejected += 1,
                    (want, got) => return Err(format!("{arm:?} {s:?} {a:?}: expected {want:?}, got {got:?}")),
                }
            }
        }
    }
    let published = transition_table();
    ensure!(published.len() == 224, "published table has {} rows", published.len());
    ensure!(
        published.iter().all(|e| e.next == expected(e.arm, e.state, e.action)),
        "published table disagrees"
    );

    // Fig. 2 walkthrough on a treatment image, then the control-arm refusal.
    let mut store = common::in_memory();
    let job = &common::job_ids(Arm::Treatment, "walk", 1)[0];
    store.ingest_job(&common::manifest(job, 1), "portal", 0).map_err(|e| e.to_string())?;
    let img = format!("{job}/img00");
    let file = bladeqc::store::PredictionFile {
        image_id: img.clone(),
        instances: vec![
            common::rect_entry("a", 100.0, 100.0, 80.0, 30.0, 0.95),
            common::rect_entry("b", 400.0, 100.0, 60.0, 60.0, 0.7),
        ],
    };
    let step = |r: bladeqc::Result<WorkflowState>| r.map_err(|e| e.to_string());
    store.ingest_predictions(&file, None, "model", 1).map_err(|e| e.to_string())?;
    step(store.open_stage(&img, Stage::Qc1, "ana", 10))?;
    store.convert_clue(&img, "clue-a", None, None, "ana", 20).map_err(|e| e.to_string())?;
    store.dismiss_clue(&img, "clue-b", "ana", 30).map_err(|e| e.to_string())?;
    let manual = Polygon::rect(900.0, 900.0, 960.0, 950.0).unwrap();
    let ann = store.draw_annotation(&img, manual, None, "ana", 40).map_err(|e| e.to_string())?;
    step(store.close_stage(&img, Stage::Qc1, "ana", 50))?;
    step(store.complete_stage(&img, Stage::Qc1, "ana", 51))?;
    step(store.open_stage(&img, Stage::Qc2, "rev", 60))?;
    store.approve_annotation(&img, &ann.annotation_id, "rev", 70).map_err(|e| e.to_string())?;
    store.flag_missed(&img, None, None, None, "rev", 80).map_err(|e| e.to_string())?;
    step(store.close_stage(&img, Stage::Qc2, "rev", 90))?;
    let end = step(store.complete_stage(&img, Stage::Qc2, "rev", 91))?;
    ensure!(end == WorkflowState::Qc2Done, "walkthrough ended in {end:?}");

    let cjob = &common::job_ids(Arm::Control, "walk", 1)[0];
    store.ingest_job(&common::manifest(cjob, 1), "portal", 0).map_err(|e| e.to_string())?;
    let cimg = format!("{cjob}/img00");
    step(store.open_stage(&cimg, Stage::Qc1, "ana", 10))?;
    let refused = store.convert_clue(&cimg, "clue-a", None, None, "ana", 11);
    ensure!(matches!(refused, Err(Error::Rejected(_))), "control conversion: {refused:?}");
    Ok(format!("{rejected} illegal (arm, state, action) triples rejected; walkthrough reached QC2_DONE"))
}

async fn get(app: &axum::Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

const REPORT_URIS: [&str; 5] = [
    "/reports/conversion",
    "/reports/productivity?arm=control",
    "/reports/productivity?arm=treatment",
    "/reports/comparison",
    "/reports/comparison?format=tabular",
];

fn replay_determinism(rt: &tokio::runtime::Runtime) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut live = Store::open(dir.path(), StoreConfig::default()).map_err(|e| e.to_string())?;
    common::synthetic_traffic(&mut live, 11, 10_000);
    let events: usize = live.state().jobs.values().map(|j| j.events.len()).sum();
    let incremental = live.state().canonical_json();

    let mut twin = common::in_memory();
    common::synthetic_traffic(&mut twin, 11, 10_000);
    ensure!(twin.state().canonical_json() == incremental, "in-memory and file-backed builds differ");

    let replayed = Store::from_journal(&dir.path().join(bladeqc::store::JOURNAL_FILE), StoreConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(replayed.state().canonical_json() == incremental, "replayed state differs");

    let before = rt.block_on(async {
        let app = router(AppState::new(live), None);
        let mut out = Vec::new();
        for uri in REPORT_URIS {
            out.push(get(&app, uri).await);
        }
        out
    });
    let restarted = Store::open(dir.path(), StoreConfig::default()).map_err(|e| e.to_string())?;
    let after = rt.block_on(async {
        let app = router(AppState::new(restarted), None);
        let mut out = Vec::new();
        for uri in REPORT_URIS {
            out.push(get(&app, uri).await);
        }
        out
    });
    for ((uri, b), a) in REPORT_URIS.iter().zip(&before).zip(&after) {
        ensure!(b.0 == StatusCode::OK, "{uri} -> {}: {}", b.0, String::from_utf8_lossy(&b.1));
        ensure!(a == b, "{uri} differs after restart");
    }
    Ok(format!("{events} events; replay and {} report endpoints byte-identical", REPORT_URIS.len()))
}

fn cli_api_parity(rt: &tokio::runtime::Runtime) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = common::rng(0xFA17);
    let mut images = common::headline_fixture();
    images.extend((0..10).map(|k| common::random_eval_image(&mut rng, &format!("rand{k}"), 512, 6, 10)));
    let doc = serde_json::to_string(&serde_json::json!({ "images": images })).unwrap();
    let path = dir.path().join("eval.json");
    std::fs::write(&path, &doc).map_err(|e| e.to_string())?;

    let out = Command::new(env!("CARGO_BIN_EXE_bladeqc"))
        .args(["--format", "structured", "eval"])
        .arg(&path)
        .args(["--iou-threshold", "0.3"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "cli failed: {}", String::from_utf8_lossy(&out.stderr));
    let cli: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    let body = serde_json::json!({ "images": images, "iou_threshold": 0.3 }).to_string();
    let api: serde_json::Value = rt.block_on(async {
        let app = router(AppState::new(common::in_memory()), None);
        let req = Request::post("/eval").header("content-type", "application/json").body(Body::from(body)).unwrap();
        let resp = app.oneshot(req).await.unwrap();
        serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
    });
    ensure!(cli["kind"] == "metrics", "unexpected CLI document {cli}");
    ensure!(cli["report"] == api["data"], "CLI {} != API {}", cli["report"], api["data"]);
    let parsed = bladeqc::analytics::parse_report(&String::from_utf8_lossy(&out.stdout)).map_err(|e| e.to_string())?;
    let text = export_report(&parsed, ReportFormat::Tabular);
    ensure!(matches!(parsed, Report::Metrics(_)) && text.contains("damage_recall"), "tabular render");
    Ok(format!("recall {} precision {}", api["data"]["damage_recall"], api["data"]["damage_precision"]))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<(&str, Option<Duration>, Box<dyn FnOnce() -> Check + '_>)> = vec![
        ("table-1 conversion report", Some(Duration::from_secs(1)), Box::new(table1_reproduction)),
        ("table-2 productivity report", Some(Duration::from_secs(1)), Box::new(table2_reproduction)),
        ("greedy vs exhaustive oracle", Some(Duration::from_secs(30)), Box::new(oracle_equivalence)),
        ("headline-shape fixture", None, Box::new(headline_shape)),
        ("threshold monotonicity", None, Box::new(threshold_monotonicity)),
        ("rotating calipers vs angle sweep", Some(Duration::from_secs(10)), Box::new(rotating_calipers)),
        ("raster vs exact IoU", None, Box::new(raster_vs_exact)),
        ("RLE codec round trip", None, Box::new(rle_codec)),
        ("A/B assignment", None, Box::new(ab_assignment)),
        ("workflow legality", None, Box::new(workflow_legality)),
        ("replay determinism", None, Box::new(|| replay_determinism(&rt))),
        ("CLI/API eval parity", None, Box::new(|| cli_api_parity(&rt))),
    ];
    let mut failed = BTreeSet::new();
    for (k, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {took:.2?}, budget {b:?}")),
            (r, _) => r,
        };
        let id = format!("AC-{:02}", k + 1);
        match result {
            Ok(detail) => println!("PASS {id} {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                println!("FAIL {id} {name}: {why} [{took:.2?}]");
                failed.insert(id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("{} criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
