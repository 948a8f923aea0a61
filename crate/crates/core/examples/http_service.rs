// Driving the HTTP API in-process, the way the review UI does.
//
//     cargo run --example http_service
//
// `bladeqc serve --port 8080` exposes the same router over TCP.

use axum::body::Body;
use axum::http::Request;
use bladeqc::service::{router, AppState};
use bladeqc::store::{Store, StoreConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Value) -> Result<(u16, Value), Box<dyn std::error::Error>> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .header("x-actor", "ana")
        .body(if body.is_null() { Body::empty() } else { Body::from(body.to_string()) })?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, serde_json::from_slice(&bytes)?))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = router(AppState::new(Store::in_memory(StoreConfig::default())), None);

    let manifest = json!({
        "job_id": "WT21-0001",
        "turbine_id": "WT21",
        "images": [{ "image_id": "WT21-0001-A", "file_ref": "s3://bucket/a.jpg" }]
    });
    let (status, job) = call(&app, "POST", "/jobs", manifest).await?;
    println!("POST /jobs → {status}: arm {}", job["data"]["arm"]);

    let (status, reply) = call(&app, "POST", "/images/WT21-0001-A/qc1/open", Value::Null).await?;
    println!("POST qc1/open → {status}: {}", reply["data"]["state"]);
    let (status, reply) = call(&app, "POST", "/images/WT21-0001-A/qc1/open", Value::Null).await?;
    println!("POST qc1/open again → {status}: {}", reply["error"]["message"]);

    let ann = json!({ "polygon": [10, 10, 90, 10, 90, 40, 10, 40], "damage_label": "erosion" });
    let (status, reply) = call(&app, "POST", "/images/WT21-0001-A/annotations", ann).await?;
    println!("POST annotations → {status}: {}", reply["data"]["id"]);

    let eval = json!([{
        "image_id": "x", "width": 64, "height": 64,
        "ground_truths": [[0, 0, 20, 0, 20, 20, 0, 20]],
        "predictions": [{ "id": "p", "score": 0.9, "polygon": [0, 0, 20, 0, 20, 18, 0, 18] }]
    }]);
    let (_, reply) = call(&app, "POST", "/eval", eval).await?;
    println!("POST /eval → recall {}  precision {}", reply["data"]["damage_recall"], reply["data"]["damage_precision"]);

    let (_, events) = call(&app, "GET", "/images/WT21-0001-A/events", Value::Null).await?;
    for e in events["data"].as_array().unwrap() {
        println!("  #{} {} by {}", e["seq"], e["action"], e["actor"]);
    }
    Ok(())
}
