// The journal is the source of truth: reopening a data directory replays it.
//
//     cargo run --example journal_replay

use bladeqc::store::{read_journal, JobManifest, ManifestImage, Stage, Store, StoreConfig, StoreState, JOURNAL_FILE};
use sha2::{Digest, Sha256};

fn digest(state: &StoreState) -> String {
    Sha256::digest(state.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("bladeqc-journal-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let before = {
        let mut store = Store::open(&dir, StoreConfig::default())?;
        let manifest = JobManifest {
            job_id: "WT05-0007".into(),
            turbine_id: "WT05".into(),
            created_at: Some(1_718_000_000_000),
            images: vec![ManifestImage {
                image_id: "WT05-0007-C".into(),
                file_ref: "s3://bucket/c.jpg".into(),
                native_resolution: None,
                working_resolution: None,
                metadata: Default::default(),
            }],
        };
        store.ingest_job(&manifest, "portal", 1_718_000_000_000)?;
        let arm = store.state().job("WT05-0007")?.job.arm;
        println!("ingested WT05-0007 ({} arm)", arm.as_str());
        if arm == bladeqc::workflow::Arm::Treatment {
            let empty = bladeqc::store::PredictionFile { image_id: "WT05-0007-C".into(), instances: vec![] };
            store.ingest_predictions(&empty, None, "model", 1_718_000_000_500)?;
        }
        store.open_stage("WT05-0007-C", Stage::Qc1, "ana", 1_718_000_001_000)?;
        store.close_stage("WT05-0007-C", Stage::Qc1, "ana", 1_718_000_031_000)?;
        digest(store.state())
    };

    let path = dir.join(JOURNAL_FILE);
    let text = std::fs::read_to_string(&path)?;
    println!("{} lines in {}", text.lines().count(), path.display());
    println!("last line: {}", text.lines().last().unwrap());

    let reopened = Store::open(&dir, StoreConfig::default())?;
    let records = read_journal(std::io::BufReader::new(std::fs::File::open(&path)?))?;
    let replayed = StoreState::replay(records)?;
    println!("state before  {before}");
    println!("reopened      {}", digest(reopened.state()));
    println!("replayed      {}", digest(&replayed));
    assert_eq!(before, digest(&replayed));

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
