//! The annotation service, exercised in-process.
//!
//!     cargo run --release --example annotation_server            # scripted session
//!     cargo run --release --example annotation_server -- serve   # listen on 127.0.0.1:8080
//!
//! The scripted session works on a scratch copy of the mini-dataset: it
//! lists images, requests a live preview, saves an annotation and shows what
//! a stale save gets back.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use pointsal::config::PipelineConfig;
use pointsal::service::{router, serve, ServiceState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundled = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let scratch = tempfile::tempdir()?;
    let root = scratch.path();
    copy_dir(&bundled, root)?;
    std::fs::write(root.join("annotations.json"), "{\"images\": []}\n")?;
    let state = Arc::new(ServiceState::new(
        &root.join("images"),
        &root.join("edges"),
        &root.join("annotations.json"),
        PipelineConfig::default(),
    )?);

    if std::env::args().nth(1).as_deref() == Some("serve") {
        serve(state, ([127, 0, 0, 1], 8080).into(), None).await?;
        return Ok(());
    }

    let app = router(state, None);
    let (_, images) = call(&app, Method::GET, "/api/images", None).await;
    println!("GET /api/images -> {images}");

    let points = json!({ "foreground_points": [{ "x": 32, "y": 24 }], "background_point": { "x": 4, "y": 43 } });
    let (status, preview) = call(&app, Method::POST, "/api/images/m01_single/preview", Some(points.clone())).await;
    println!(
        "POST preview -> {status}, radius {}, trimap {} base64 chars",
        preview["radius"],
        preview["trimap"].as_str().map_or(0, str::len)
    );

    let bad = json!({ "foreground_points": [{ "x": 99, "y": 24 }] });
    let (status, err) = call(&app, Method::POST, "/api/images/m01_single/preview", Some(bad)).await;
    println!("POST preview out of bounds -> {status} {}", err["error"]);

    let mut save = points;
    save["expected_version"] = json!(0);
    let (status, saved) = call(&app, Method::PUT, "/api/images/m01_single/annotation", Some(save.clone())).await;
    println!("PUT annotation -> {status} {saved}");
    let (status, conflict) = call(&app, Method::PUT, "/api/images/m01_single/annotation", Some(save)).await;
    println!("PUT stale annotation -> {status} {conflict}");

    println!("annotations.json now:\n{}", std::fs::read_to_string(root.join("annotations.json"))?);
    Ok(())
}
