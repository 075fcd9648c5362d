use irsloc_core::api::{ApiError, CrbResponse, ExperimentResponse, LocalizeResponse, ScenarioInfo};
use serde_json::json;

async fn server() -> String {
    let (addr, _) = irsloc_service::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    format!("http://{addr}")
}

#[tokio::test]
async fn health_and_scenarios() {
    let base = server().await;
    let c = reqwest::Client::new();
    assert_eq!(c.get(format!("{base}/health")).send().await.unwrap().text().await.unwrap(), "ok");
    let list: Vec<ScenarioInfo> = c.get(format!("{base}/v1/scenarios")).send().await.unwrap().json().await.unwrap();
    let ids: Vec<&str> = list.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"]);
}

#[tokio::test]
async fn crb_with_empty_body_uses_defaults() {
    let base = server().await;
    let r: CrbResponse = reqwest::Client::new().post(format!("{base}/v1/crb")).send().await.unwrap().json().await.unwrap();
    assert_eq!(r.entries.len(), 5);
    let collab = &r.entries[0];
    assert_eq!((collab.scheme.as_str(), collab.k, collab.n, collab.m), ("collaborative", 3, 10, 10));
    assert!(collab.crb_location > 0.0);
    assert!((collab.crb_location_db - 10.0 * collab.crb_location.log10()).abs() < 1e-9);
}

#[tokio::test]
async fn localize_partial_scene() {
    let base = server().await;
    let body = json!({ "scene": { "target_position": [3.0, 7.0] }, "methods": ["three-stage", "ls"] });
    let r: LocalizeResponse =
        reqwest::Client::new().post(format!("{base}/v1/localize")).json(&body).send().await.unwrap().json().await.unwrap();
    assert_eq!(r.truth, [3.0, 7.0]);
    assert_eq!(r.results.len(), 2);
    for m in &r.results {
        let p = m.estimate.as_ref().unwrap().position;
        assert!((p[0] - 3.0).abs() < 1e-9 && (p[1] - 7.0).abs() < 1e-9, "{}: {p:?}", m.method);
    }
}

#[tokio::test]
async fn experiment_round_trip() {
    let base = server().await;
    let body = json!({ "scenario": "fig7", "n_trials": 4, "grid": [40.0], "schemes": ["three-stage", "crb"] });
    let r: ExperimentResponse =
        reqwest::Client::new().post(format!("{base}/v1/experiments")).json(&body).send().await.unwrap().json().await.unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.empty_points.is_empty());
    assert!(r.rows.iter().all(|row| row.trials == 4 && row.value > 0.0));
}

#[tokio::test]
async fn errors_carry_status_and_kind() {
    let base = server().await;
    let c = reqwest::Client::new();
    let cases = [
        ("/v1/experiments", "{\"scenario\": \"fig9\"}", 404, "unknown-preset"),
        ("/v1/experiments", "{\"scenario\": \"fig3\", \"n_trials\": 0}", 400, "config"),
        ("/v1/crb", "{not json", 400, "parse"),
        ("/v1/crb", "{\"schemes\": [\"psychic\"]}", 400, "parse"),
        ("/v1/localize", "{\"scene\": {\"irs\": []}}", 400, "config"),
    ];
    for (path, body, status, kind) in cases {
        let resp = c.post(format!("{base}{path}")).body(body).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), status, "{path} {body}");
        let e: ApiError = resp.json().await.unwrap();
        assert_eq!(e.kind, kind, "{}", e.message);
    }
}

#[tokio::test]
async fn empty_points_serialize_as_null() {
    let base = server().await;
    // A target sitting on an IRS is degenerate, so every trial fails and values are NaN.
    let spec = {
        let mut s = irsloc_core::bench::ExperimentSpec::preset(irsloc_core::bench::ScenarioId::Fig7).unwrap();
        s.grid = vec![50.0];
        s.n_trials = 2;
        s.schemes = vec!["ls".into()];
        s.region = irsloc_core::fisher::Region::Point { at: [10.0, 50.0] };
        s
    };
    let resp = reqwest::Client::new()
        .post(format!("{base}/v1/experiments"))
        .json(&json!({ "spec": spec }))
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_success());
    let text = resp.text().await.unwrap();
    let r: ExperimentResponse = serde_json::from_str(&text).unwrap();
    assert_eq!(r.rows[0].failed, 2);
    assert_eq!(r.empty_points, vec![50.0]);
    assert!(r.rows[0].value.is_nan());
    assert!(text.contains("\"value\":null"));
}
