use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use defi_rank_cli::api::router;
use defi_rank_core::data::DataDir;
use defi_rank_core::store::ReportStore;
use defi_rank_core::{evaluate_series, EvaluationConfig, Granularity};

struct Fixture {
    _dir: tempfile::TempDir,
    store: ReportStore,
    expected: Value,
}

fn fixture() -> Fixture {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/tiny");
    let config = EvaluationConfig::load(&src.join("config.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let data_dir = DataDir::new(dir.path());
    data_dir.ingest(&config.inputs.clone().unwrap().resolved(&src), true).unwrap();
    let data = data_dir.load().unwrap();
    let mut outcomes = Vec::new();
    for g in [Granularity::Week, Granularity::Day] {
        let mut c = config.clone();
        c.granularity = g;
        outcomes.push((g, evaluate_series(&c, &data).unwrap()));
    }
    let store = ReportStore::new(data_dir.runs_path());
    store.write_run("fixture", &config, data_dir.input_digests().unwrap(), &outcomes).unwrap();
    let expected = serde_json::from_str(&std::fs::read_to_string(src.join("expected.json")).unwrap()).unwrap();
    Fixture { _dir: dir, store, expected }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn dec(v: &Value) -> f64 {
    v.as_str().expect("decimal string").parse().unwrap()
}

#[tokio::test]
async fn lists_runs() {
    let f = fixture();
    let app = router(f.store.clone());
    let (status, body) = call(&app, "GET", "/api/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    let runs = body.as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["run_id"], "fixture");
    assert_eq!(runs[0]["granularities"][0]["granularity"], "week");
    assert_eq!(runs[0]["granularities"][0]["dates"], json!(["2022-01-03", "2022-01-10"]));
    assert_eq!(runs[0]["consistency_warning"], false);
}

#[tokio::test]
async fn scores_and_ranks() {
    let f = fixture();
    let app = router(f.store.clone());
    let (status, body) = call(&app, "GET", "/api/runs/fixture/scores?granularity=week&ordinate=score", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["dates"], json!(["2022-01-03", "2022-01-10"]));
    for line in body["series"].as_array().unwrap() {
        let name = line["protocol"].as_str().unwrap();
        for (k, date) in ["2022-01-03", "2022-01-10"].iter().enumerate() {
            let want = f.expected["baseline"][date].as_array().unwrap().iter().find(|r| r["protocol"] == name).unwrap();
            assert!((dec(&line["values"][k]) - want["score"].as_f64().unwrap()).abs() < 1e-9);
        }
    }
    let (_, body) = call(&app, "GET", "/api/runs/fixture/scores?ordinate=rank", None).await;
    assert_eq!(body["granularity"], "week");
    let ranks: Vec<Value> = body["series"].as_array().unwrap().iter().map(|l| l["values"].clone()).collect();
    assert_eq!(ranks, vec![json!(["1", "1"]), json!(["2", "2"]), json!(["3", "3"])]);

    let (_, body) = call(&app, "GET", "/api/runs/fixture/scores?granularity=day", None).await;
    assert_eq!(body["dates"].as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn protocols_listing() {
    let f = fixture();
    let app = router(f.store.clone());
    let (status, body) = call(&app, "GET", "/api/runs/fixture/protocols", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> =
        body["protocols"].as_array().unwrap().iter().map(|p| p["protocol"].as_str().unwrap()).collect();
    assert_eq!(names, ["aave", "compound", "liquity"]);
    assert_eq!(body["protocols"][0]["dates"]["week"], 2);
    assert_eq!(body["protocols"][0]["dates"]["day"], 8);
}

#[tokio::test]
async fn whatif_identity_reproduces_stored_scores_exactly() {
    let f = fixture();
    let app = router(f.store.clone());
    let records = f.store.records("fixture", Granularity::Week).unwrap();
    for body in [None, Some(json!({})), Some(json!({"weights": {"criteria": [1, 1, 1]}}))] {
        let (status, resp) = call(&app, "POST", "/api/runs/fixture/whatif", body).await;
        assert_eq!(status, StatusCode::OK);
        for date in resp["dates"].as_array().unwrap() {
            for row in date["rows"].as_array().unwrap() {
                let stored = records
                    .iter()
                    .find(|r| r.date.to_string() == date["date"].as_str().unwrap() && r.protocol == row["protocol"])
                    .unwrap();
                assert_eq!(dec(&row["score"]).to_bits(), stored.score.to_bits());
                assert_eq!(row["rank"].as_u64().unwrap() as usize, stored.rank);
            }
        }
    }
}

#[tokio::test]
async fn whatif_doubled_decentralization_reranks() {
    let f = fixture();
    let app = router(f.store.clone());
    let (status, resp) =
        call(&app, "POST", "/api/runs/fixture/whatif", Some(json!({"weights": {"criteria": [1, 1, 2]}}))).await;
    assert_eq!(status, StatusCode::OK);
    for date in resp["dates"].as_array().unwrap() {
        let want = f.expected["decentralization_doubled"][date["date"].as_str().unwrap()].as_array().unwrap();
        for w in want {
            let row = date["rows"].as_array().unwrap().iter().find(|r| r["protocol"] == w["protocol"]).unwrap();
            assert!((dec(&row["score"]) - w["score"].as_f64().unwrap()).abs() < 1e-9);
            assert_eq!(row["rank"], w["rank"]);
        }
    }
    assert_eq!(resp["dates"][1]["criterion_weights"]["decentralization"], 0.5);
}

#[tokio::test]
async fn whatif_with_judgments_reports_consistency() {
    let f = fixture();
    let app = router(f.store.clone());
    let bad = json!({"weights": {"criteria": [[1, 9, 1.0/9.0], [1.0/9.0, 1, 9], [9, 1.0/9.0, 1]]}});
    let (status, resp) = call(&app, "POST", "/api/runs/fixture/whatif", Some(bad)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp["consistency_warning"], true);
    assert_eq!(resp["weight_matrices"][0]["pass"], false);
}

#[tokio::test]
async fn whatif_errors() {
    let f = fixture();
    let app = router(f.store.clone());
    let (status, resp) = call(&app, "POST", "/api/runs/nope/whatif", Some(json!({}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(resp["code"], "UnknownRun");
    assert!(resp["message"].as_str().unwrap().contains("nope"));

    let (status, resp) =
        call(&app, "POST", "/api/runs/fixture/whatif", Some(json!({"weights": {"criteria": [1, 0, 1]}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "NonPositiveWeight");

    let (status, resp) =
        call(&app, "POST", "/api/runs/fixture/whatif", Some(json!({"weights": {"criteria": [1, 1]}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(resp["code"].is_string());

    let (status, resp) = call(&app, "POST", "/api/runs/fixture/whatif", Some(json!({"wieghts": {}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "InvalidPayload");

    let (status, resp) = call(&app, "POST", "/api/runs/fixture/whatif", Some(json!({"granularity": "month"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(resp["code"], "MissingGranularity");

    let (status, resp) = call(&app, "GET", "/api/runs/fixture/scores?ordinate=height", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "InvalidOrdinate");

    let (status, resp) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(resp["code"], "NotFound");
}

#[tokio::test]
async fn consistency_endpoint() {
    let app = router(ReportStore::new("/nonexistent"));
    let (status, resp) =
        call(&app, "POST", "/api/consistency", Some(json!({"matrix": [[1, 1, 1], [1, 1, 1], [1, 1, 1]]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp["cr"], 0.0);
    assert_eq!(resp["pass"], true);

    let m = json!({"matrix": [[1, 2, 5], [0.5, 1, 2], [0.2, 0.5, 1]]});
    let (_, resp) = call(&app, "POST", "/api/consistency", Some(m)).await;
    assert!((resp["lambda_max"].as_f64().unwrap() - 3.005_535_111_738_497_6).abs() < 1e-6);
    assert_eq!(resp["pass"], true);
    assert_eq!(resp["row_residuals"].as_array().unwrap().len(), 3);

    // One strong judgment against an otherwise uniform matrix.
    let m = json!({"matrix": [[1, 9, 1], [1.0/9.0, 1, 1], [1, 1, 1]]});
    let (_, resp) = call(&app, "POST", "/api/consistency", Some(m)).await;
    assert_eq!(resp["pass"], false);
    let residuals: Vec<f64> = resp["row_residuals"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(residuals.iter().all(|r| *r >= 0.0));

    let (status, resp) = call(&app, "POST", "/api/consistency", Some(json!({"matrix": [[1, 2], [2, 1]]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "NotReciprocal");

    let (status, resp) = call(&app, "POST", "/api/consistency", Some(json!({"matrix": [[1, 2.5], [0.4, 1]]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "NotSaatyValue");

    let (status, resp) = call(&app, "POST", "/api/consistency", Some(json!({"matrix": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(resp["code"], "InvalidPayload");
}

#[tokio::test]
async fn identical_requests_return_identical_bodies() {
    let f = fixture();
    let app = router(f.store.clone());
    let body = json!({"weights": {"valuation": [2, 1, 1]}});
    let (_, a) = call(&app, "POST", "/api/runs/fixture/whatif", Some(body.clone())).await;
    let (_, b) = call(&app, "POST", "/api/runs/fixture/whatif", Some(body)).await;
    assert_eq!(a, b);
}
