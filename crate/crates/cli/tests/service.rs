use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use waring_cli::service::router;

async fn call(req: Request<Body>) -> (StatusCode, String) {
    let resp = router(None).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get(uri: &str) -> (StatusCode, String) {
    call(Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, text) = call(req).await;
    (status, serde_json::from_str(&text).unwrap())
}

fn method<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == name)
        .unwrap()
}

#[tokio::test]
async fn healthz() {
    assert_eq!(get("/healthz").await, (StatusCode::OK, "ok".to_string()));
}

#[tokio::test]
async fn interval_small_sample() {
    let (status, body) = post("/api/interval", json!({"n10": 10, "n01": 3, "n11": 3})).await;
    assert_eq!(status, StatusCode::OK);
    let g = method(&body, "gwd_credible");
    assert_eq!(
        (g["lb"].as_f64(), g["ub"].as_f64()),
        (Some(17.0), Some(69.0))
    );
    assert_eq!(body["ncap"], 16);
}

#[tokio::test]
async fn interval_method_subset() {
    let body = json!({"n10": 511, "n01": 232, "n11": 89, "methods": ["wald_chapman"]});
    let (status, r) = post("/api/interval", body).await;
    assert_eq!(status, StatusCode::OK);
    let rows = r["methods"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["method"], "wald_chapman");
}

#[tokio::test]
async fn interval_field_errors() {
    let (status, body) = post("/api/interval", json!({"n10": -1, "n01": "x", "level": 2})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid input");
    let fields = body["fields"].as_object().unwrap();
    for f in ["n10", "n01", "n11", "level"] {
        assert!(fields.contains_key(f), "{f} missing from {body}");
    }
}

#[tokio::test]
async fn interval_malformed_body() {
    let req = Request::post("/api/interval")
        .body(Body::from("{not json"))
        .unwrap();
    let (status, _) = call(req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn interval_improper_posterior() {
    let (status, body) = post(
        "/api/interval",
        json!({"n10": 4, "n01": 5, "n11": 0, "ell": 1}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("use ell >= 2"));
}

#[tokio::test]
async fn interval_undefined_method_is_per_row() {
    let (status, body) = post("/api/interval", json!({"n10": 4, "n01": 5, "n11": 0})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(method(&body, "wald")["error"].is_string());
    assert!(method(&body, "gwd_credible").get("error").is_none());
}

#[tokio::test]
async fn posterior_curve_carries_mass() {
    let (status, text) = get("/api/posterior?n10=10&n01=3&n11=3&ell=3").await;
    assert_eq!(status, StatusCode::OK);
    let c: Value = serde_json::from_str(&text).unwrap();
    let mass: f64 = c["pmf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!(mass >= 0.999, "{mass}");
    assert_eq!(c["stride"], 1);
    assert_eq!((c["lb"].as_u64(), c["ub"].as_u64()), (Some(17), Some(54)));
    assert_eq!(c["n"][0], 16);

    let (status, text) = get("/api/posterior?n10=10&n01=3&n11=3&ell=2").await;
    assert_eq!(status, StatusCode::OK);
    let c: Value = serde_json::from_str(&text).unwrap();
    let mass: f64 = c["pmf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!(mass >= 0.999, "{mass}");
    assert_eq!((c["lb"].as_u64(), c["ub"].as_u64()), (Some(17), Some(69)));
}

#[tokio::test]
async fn posterior_curve_is_thinned() {
    let (status, text) = get("/api/posterior?n10=493&n01=142&n11=7&max_points=100").await;
    assert_eq!(status, StatusCode::OK);
    let c: Value = serde_json::from_str(&text).unwrap();
    assert!(c["pmf"].as_array().unwrap().len() <= 100);
    assert!(c["stride"].as_u64().unwrap() > 1);
}

#[tokio::test]
async fn posterior_missing_counts() {
    let (status, text) = get("/api/posterior?n10=3").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["fields"]["n11"], "required");
}

#[tokio::test]
async fn prior_curve() {
    let (status, text) = get("/api/prior?ncap=10&ell=3").await;
    assert_eq!(status, StatusCode::OK);
    let c: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(
        (c["a"].as_f64(), c["b"].as_f64(), c["c"].as_f64()),
        (Some(1.0), Some(11.0), Some(14.0))
    );
    let (status, _) = get("/api/prior?ncap=10&ell=1").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn coverage_streams_csv() {
    let resp = router(None)
        .oneshot(
            Request::get("/api/coverage?N=20&grid=0.1,0.3&methods=gwd:2,tlogit")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/csv"));
    let text = String::from_utf8(
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
    .unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "N,p1,p2,method,ell,level,coverage,expected_rel_length"
    );
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines[1].starts_with("20,0.100000,0.100000,gwd_credible,2.000000,0.950000,0.959157,"));
}

#[tokio::test]
async fn coverage_too_large() {
    let (status, _) = get("/api/coverage?N=201").await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn coverage_bad_grid() {
    let (status, text) = get("/api/coverage?N=20&grid=0.5:0.1:0.1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(text.contains("grid"));
}

#[tokio::test]
async fn unknown_path_without_assets() {
    let (status, _) = get("/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_assets_are_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>hi</h1>").unwrap();
    let app = router(Some(dir.path().to_path_buf()));
    let resp = app
        .clone()
        .oneshot(Request::get("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<h1>hi</h1>");
    let resp = app
        .oneshot(Request::get("/healthz").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}

#[tokio::test]
async fn service_matches_cli() {
    let out = Command::new(env!("CARGO_BIN_EXE_waring"))
        .args([
            "interval", "--n10", "1", "--n01", "7", "--n11", "5", "--format", "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cli: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (status, api) = post("/api/interval", json!({"n10": 1, "n01": 7, "n11": 5})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cli, api);
}

#[tokio::test]
async fn extreme_inputs_never_500() {
    let big = u64::MAX.to_string();
    let uris = [
        "/api/posterior?n10=1000000000&n01=1000000000&n11=1".to_string(),
        "/api/posterior?n10=5&n01=5&n11=0&ell=1.0000001".to_string(),
        format!("/api/posterior?n10={big}&n01=1&n11=1"),
        "/api/prior?ncap=1000000000000&ell=2".to_string(),
        "/api/prior?ncap=3&ell=1e300".to_string(),
    ];
    for uri in uris {
        let (status, text) = get(&uri).await;
        assert!(!status.is_server_error(), "{uri}: {status} {text}");
    }
    let bodies = [
        json!({"n10": 5, "n01": 5, "n11": 0, "ell": 1.0000001}),
        json!({"n10": u64::MAX, "n01": 1, "n11": 1}),
        json!({"n10": 1_000_000_000u64, "n01": 1_000_000_000u64, "n11": 1, "methods": ["gwd", "gwd_normal_approx", "wald_chapman"]}),
    ];
    for body in bodies {
        let (status, v) = post("/api/interval", body.clone()).await;
        assert!(!status.is_server_error(), "{body}: {status} {v}");
    }
}
