// Damage-level recall and precision with union-IoU matching.
//
//     cargo run --example damage_metrics

use bladeqc::geometry::Polygon;
use bladeqc::metrics::{best_subset_oracle, evaluate_dataset, match_image, threshold_sweep, EvalImage, EvalPrediction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rect = |x0, y0, x1, y1| Polygon::rect(x0, y0, x1, y1);

    // One long crack predicted as two fragments, one clean hit, one miss,
    // and one false alarm.
    let images = vec![
        EvalImage {
            image_id: "blade-A".into(),
            width: 512,
            height: 256,
            ground_truths: vec![rect(20.0, 40.0, 420.0, 80.0)?, rect(300.0, 150.0, 360.0, 200.0)?],
            predictions: vec![
                EvalPrediction::from_polygon("frag-1", rect(20.0, 40.0, 210.0, 80.0)?).with_score(0.8),
                EvalPrediction::from_polygon("frag-2", rect(205.0, 40.0, 420.0, 82.0)?).with_score(0.7),
                EvalPrediction::from_polygon("glare", rect(450.0, 200.0, 500.0, 240.0)?).with_score(0.4),
            ],
        },
        EvalImage {
            image_id: "blade-B".into(),
            width: 512,
            height: 256,
            ground_truths: vec![rect(100.0, 100.0, 180.0, 160.0)?],
            predictions: vec![EvalPrediction::from_polygon("chip", rect(98.0, 102.0, 182.0, 158.0)?).with_score(0.95)],
        },
    ];

    let m = match_image(&images[0], 0.5)?;
    for g in &m.ground_truths {
        println!(
            "gt #{}: union IoU {:.3} (best single {:.3}) from {:?} → {}",
            g.index,
            g.union_iou,
            g.best_single_iou,
            g.contributors,
            if g.matched { "found" } else { "missed" }
        );
    }
    let oracle = best_subset_oracle(&images[0].ground_truths[0], &images[0].predictions, 512, 256)?;
    println!("exhaustive best subset for gt #0: {:?} at {:.3}", oracle.subset, oracle.union_iou);

    let r = evaluate_dataset(&images, 0.3)?;
    println!("\n{}", serde_json::to_string_pretty(&r)?);

    for (t, r) in threshold_sweep(&images, &[0.3, 0.5, 0.7, 0.9])? {
        println!("t={t:.1}  recall {:.3}  precision {:.3}", r.damage_recall.unwrap_or(0.0), r.damage_precision.unwrap_or(0.0));
    }
    Ok(())
}
