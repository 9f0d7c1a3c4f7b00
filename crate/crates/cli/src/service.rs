//! Stateless JSON service over the shared report functions.

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::{Body, Bytes};
use axum::extract::Query;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use waring_core::coverage::{coverage_cell_from_table, IntervalTable};
use waring_core::{CaptureCounts, GridSpec, MethodSpec, SampleSpace};

use crate::cli::{parse_grid, parse_method_specs, CliError};
use crate::report::{self, MethodName, ReportError};

/// Largest population accepted by `/api/coverage`.
pub const MAX_COVERAGE_N: u64 = 200;

pub fn router(assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/interval", post(interval))
        .route("/api/posterior", get(posterior))
        .route("/api/prior", get(prior))
        .route("/api/coverage", get(coverage))
        .route("/healthz", get(|| async { "ok" }));
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { error(StatusCode::NOT_FOUND, "no such endpoint") }),
    }
}

pub async fn serve(addr: SocketAddr, assets: Option<PathBuf>) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(assets))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn error(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

fn invalid(fields: BTreeMap<String, String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "error": "invalid input", "fields": fields })),
    )
        .into_response()
}

impl IntoResponse for ReportError {
    fn into_response(self) -> Response {
        match self {
            ReportError::Invalid(fields) => invalid(fields),
            ReportError::Improper(msg) | ReportError::Intractable(msg) => {
                error(StatusCode::UNPROCESSABLE_ENTITY, &msg)
            }
        }
    }
}

/// Collects field-level problems while reading parameters.
#[derive(Default)]
struct Fields {
    errors: BTreeMap<String, String>,
}

impl Fields {
    fn fail(&mut self, name: &str, message: &str) {
        self.errors
            .entry(name.to_string())
            .or_insert_with(|| message.to_string());
    }

    fn count(&mut self, name: &str, raw: Option<&str>) -> u64 {
        match raw.map(str::trim) {
            None | Some("") => {
                self.fail(name, "required");
                0
            }
            Some(s) => s.parse().unwrap_or_else(|_| {
                self.fail(name, "must be a non-negative integer");
                0
            }),
        }
    }

    fn number(&mut self, name: &str, raw: Option<&str>, default: f64) -> f64 {
        match raw.map(str::trim) {
            None | Some("") => default,
            Some(s) => match s.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => {
                    self.fail(name, "must be a finite number");
                    default
                }
            },
        }
    }

    fn ell_level(&mut self, ell: f64, level: f64) {
        if let Err(ReportError::Invalid(fields)) = report::validate_ell_level(ell, level) {
            for (k, v) in fields {
                self.errors.entry(k).or_insert(v);
            }
        }
    }

    fn rejection(self) -> Option<Response> {
        (!self.errors.is_empty()).then(|| invalid(self.errors))
    }
}

fn json_scalar(v: Option<&Value>) -> Option<String> {
    match v {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => Some(other.to_string()),
    }
}

async fn blocking<T, F>(f: F) -> Result<T, Response>
where
    F: FnOnce() -> T + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|_| error(StatusCode::INTERNAL_SERVER_ERROR, "computation aborted"))
}

async fn interval(body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v @ Value::Object(_)) => v,
        _ => return error(StatusCode::BAD_REQUEST, "body must be a JSON object"),
    };
    let mut f = Fields::default();
    let get = |k: &str| json_scalar(value.get(k));
    let n10 = f.count("n10", get("n10").as_deref());
    let n01 = f.count("n01", get("n01").as_deref());
    let n11 = f.count("n11", get("n11").as_deref());
    let ell = f.number("ell", get("ell").as_deref(), 2.0);
    let level = f.number("level", get("level").as_deref(), 0.95);
    f.ell_level(ell, level);
    let methods: Vec<MethodName> = match value.get("methods") {
        None | Some(Value::Null) => MethodName::DEFAULT.to_vec(),
        Some(Value::Array(items)) => {
            let parsed: Result<Vec<MethodName>, String> = items
                .iter()
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| "method names must be strings".to_string())?
                        .parse()
                })
                .collect();
            match parsed {
                Ok(m) if !m.is_empty() => m,
                Ok(_) => {
                    f.fail("methods", "must not be empty");
                    Vec::new()
                }
                Err(e) => {
                    f.fail("methods", &e);
                    Vec::new()
                }
            }
        }
        Some(_) => {
            f.fail("methods", "must be an array of method names");
            Vec::new()
        }
    };
    if let Some(r) = f.rejection() {
        return r;
    }
    let counts = CaptureCounts::new(n10, n01, n11);
    match blocking(move || report::interval_report(counts, ell, level, &methods)).await {
        Ok(Ok(r)) => Json(r).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(r) => r,
    }
}

fn max_points(f: &mut Fields, q: &HashMap<String, String>) -> u64 {
    match q.get("max_points") {
        None => report::DEFAULT_MAX_POINTS,
        Some(s) => match s.trim().parse::<u64>() {
            Ok(n) if n >= 2 => n,
            _ => {
                f.fail("max_points", "must be an integer >= 2");
                report::DEFAULT_MAX_POINTS
            }
        },
    }
}

async fn posterior(Query(q): Query<HashMap<String, String>>) -> Response {
    let mut f = Fields::default();
    let n10 = f.count("n10", q.get("n10").map(String::as_str));
    let n01 = f.count("n01", q.get("n01").map(String::as_str));
    let n11 = f.count("n11", q.get("n11").map(String::as_str));
    let ell = f.number("ell", q.get("ell").map(String::as_str), 2.0);
    let level = f.number("level", q.get("level").map(String::as_str), 0.95);
    f.ell_level(ell, level);
    let points = max_points(&mut f, &q);
    if let Some(r) = f.rejection() {
        return r;
    }
    let counts = CaptureCounts::new(n10, n01, n11);
    match blocking(move || report::posterior_curve(counts, ell, level, points)).await {
        Ok(Ok(c)) => Json(c).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(r) => r,
    }
}

async fn prior(Query(q): Query<HashMap<String, String>>) -> Response {
    let mut f = Fields::default();
    let ncap = f.count("ncap", q.get("ncap").map(String::as_str));
    if q.contains_key("ncap") && ncap == 0 {
        f.fail("ncap", "must be at least 1");
    }
    let ell = f.number("ell", q.get("ell").map(String::as_str), 2.0);
    let level = f.number("level", q.get("level").map(String::as_str), 0.95);
    f.ell_level(ell, level);
    let points = max_points(&mut f, &q);
    if let Some(r) = f.rejection() {
        return r;
    }
    match blocking(move || report::prior_curve(ncap, ell, level, points)).await {
        Ok(Ok(c)) => Json(c).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(r) => r,
    }
}

async fn coverage(Query(q): Query<HashMap<String, String>>) -> Response {
    let mut f = Fields::default();
    let n = f.count("N", q.get("N").or_else(|| q.get("n")).map(String::as_str));
    if n == 0 && !f.errors.contains_key("N") {
        f.fail("N", "must be at least 1");
    }
    let level = f.number("level", q.get("level").map(String::as_str), 0.95);
    if !(level > 0.0 && level < 1.0) {
        f.fail("level", "must lie strictly between 0 and 1");
    }
    let grid = match parse_grid(q.get("grid").map_or("0.1:0.9:0.05", String::as_str)) {
        Ok(g) => g,
        Err(e) => {
            f.fail("grid", &e.to_string());
            GridSpec::single(0.5, 0.5)
        }
    };
    let names: Vec<String> = q
        .get("methods")
        .map_or("gwd:2,gwd:3,tlogit", String::as_str)
        .split(',')
        .map(str::to_string)
        .collect();
    let methods = match parse_method_specs(&names) {
        Ok(m) => m,
        Err(CliError::Input(e)) => {
            f.fail("methods", &e);
            Vec::new()
        }
        Err(e) => {
            f.fail("methods", &e.to_string());
            Vec::new()
        }
    };
    if let Some(r) = f.rejection() {
        return r;
    }
    if n > MAX_COVERAGE_N {
        return error(
            StatusCode::PAYLOAD_TOO_LARGE,
            &format!("N = {n} exceeds the limit of {MAX_COVERAGE_N} for on-line coverage runs"),
        );
    }
    let points = match grid.points() {
        Ok(p) => p,
        Err(e) => return ReportError::from(e).into_response(),
    };

    let (tx, rx) = tokio::sync::mpsc::channel::<String>(8);
    tokio::task::spawn_blocking(move || stream_coverage(n, level, &methods, &points, &tx));
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        rx.recv()
            .await
            .map(|chunk| (Ok::<_, Infallible>(Bytes::from(chunk)), rx))
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "text/csv; charset=utf-8")
        .body(Body::from_stream(stream))
        .expect("static response parts are valid")
}

// Sends the header, then one chunk per grid point. Stops quietly when the
// client goes away.
fn stream_coverage(
    n: u64,
    level: f64,
    methods: &[MethodSpec],
    points: &[waring_core::DetectionProbs],
    tx: &tokio::sync::mpsc::Sender<String>,
) {
    if tx
        .blocking_send(format!("{}\n", report::COVERAGE_HEADER))
        .is_err()
    {
        return;
    }
    let Ok(space) = SampleSpace::new(n) else {
        return;
    };
    let tables: Vec<IntervalTable> = methods
        .iter()
        .map(|m| IntervalTable::build(&space, m, level))
        .collect();
    for &probs in points {
        let mut chunk = String::new();
        for (spec, table) in methods.iter().zip(&tables) {
            let cell = coverage_cell_from_table(&space, table, spec, probs);
            chunk.push_str(&report::coverage_csv_row(&cell));
            chunk.push('\n');
        }
        if tx.blocking_send(chunk).is_err() {
            return;
        }
    }
}
