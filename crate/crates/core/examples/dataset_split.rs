// Seeded train/val/test split and native ↔ working frame conversion.
//
//     cargo run --example dataset_split

use bladeqc::geometry::Point2;
use bladeqc::store::split::DEFAULT_RATIOS;
use bladeqc::store::{split_dataset, to_native, to_working, JobManifest, ManifestImage, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ids: Vec<String> = (0..103).map(|k| format!("WT09/{k:04}")).collect();
    let split = split_dataset(&ids, DEFAULT_RATIOS, 2024)?;
    println!(
        "103 images → train {}  val {}  test {}",
        split.count(Split::Train),
        split.count(Split::Val),
        split.count(Split::Test)
    );
    // Same seed, same assignment.
    assert_eq!(split, split_dataset(&ids, DEFAULT_RATIOS, 2024)?);
    let first_val = split.assignment.iter().find(|(_, &s)| s == Split::Val).map(|(id, _)| id);
    println!("first validation image: {}", first_val.unwrap());

    let manifest = JobManifest {
        job_id: "WT09".into(),
        turbine_id: "WT09".into(),
        created_at: None,
        images: vec![ManifestImage {
            image_id: ids[0].clone(),
            file_ref: "s3://bucket/WT09/0000.jpg".into(),
            native_resolution: None,
            working_resolution: None,
            metadata: Default::default(),
        }],
    };
    let img = &manifest.image_records()?[0];
    println!(
        "frames: native {}×{}  working {}×{}",
        img.native_resolution.0, img.native_resolution.1, img.working_resolution.0, img.working_resolution.1
    );
    for p in [Point2::new(0.0, 0.0), Point2::new(750.0, 499.0), Point2::new(1500.0, 998.0)] {
        let n = to_native(p, img)?;
        let back = to_working(n, img)?;
        println!("working ({:>6.1}, {:>5.1}) → native ({:>7.2}, {:>7.2}) → working ({:>6.1}, {:>5.1})", p.x, p.y, n.x, n.y, back.x, back.y);
    }
    Ok(())
}
