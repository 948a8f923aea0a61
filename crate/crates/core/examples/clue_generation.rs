// Turning model masks into rotated-rectangle clues.
//
//     cargo run --example clue_generation

use bladeqc::clue::{clue_containment_check, generate_clues, instance_from_entry};
use bladeqc::geometry::Polygon;
use bladeqc::store::{Frame, JobManifest, ManifestImage, PredictionEntry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = JobManifest {
        job_id: "WT07-2024-06".into(),
        turbine_id: "WT07".into(),
        created_at: None,
        images: vec![ManifestImage {
            image_id: "WT07-A-0031".into(),
            file_ref: "s3://inspections/WT07/A/0031.jpg".into(),
            native_resolution: None,
            working_resolution: None,
            metadata: Default::default(),
        }],
    };
    let image = &manifest.image_records()?[0];

    // A slanted crack in the working (downsampled) frame, a chip in native
    // pixels, and a low-confidence speck.
    let entries = [
        ("crack", 0.91, Frame::Working, "[300, 400, 340, 380, 520, 470, 480, 490]"),
        ("chip", 0.66, Frame::Native, "[4000, 1200, 4090, 1200, 4090, 1260, 4000, 1260]"),
        ("speck", 0.12, Frame::Native, "[10, 10, 14, 10, 14, 14, 10, 14]"),
    ];
    let mut instances = Vec::new();
    for (id, score, frame, poly) in entries {
        let entry = PredictionEntry {
            id: id.into(),
            score,
            mask: None,
            polygon: Some(serde_json::from_str::<Polygon>(poly)?),
            frame,
        };
        instances.push(instance_from_entry(&entry, image)?);
    }

    let clues = generate_clues(&instances, image, 0.5)?;
    for c in &clues {
        let inst = instances.iter().find(|i| i.id == c.source_instance).unwrap();
        println!(
            "{:<12} score {:.2}  {:>7.1} × {:>6.1} native px at {:>5.2}°  contains mask: {}",
            c.id,
            c.score,
            c.rect.width(),
            c.rect.height(),
            c.rect.angle(),
            clue_containment_check(c, inst, image)?
        );
    }
    println!("{} of {} instances cleared the 0.5 threshold", clues.len(), instances.len());
    Ok(())
}
