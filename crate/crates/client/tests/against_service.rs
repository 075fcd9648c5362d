use irsloc_client::{Client, ClientError};
use irsloc_core::api::{AnglesRequest, CrbRequest, ExperimentRequest, LocalizeRequest};
use irsloc_core::model::{wrap_angle, SceneConfig};

async fn client() -> Client {
    let (addr, _) = irsloc_service::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    Client::new(&format!("http://{addr}")).unwrap()
}

#[tokio::test]
async fn every_endpoint_answers() {
    let c = client().await;
    c.health().await.unwrap();
    assert_eq!(c.scenarios().await.unwrap().len(), 6);

    let crb = c.crb(&CrbRequest { schemes: vec!["collaborative".into()], ..Default::default() }).await.unwrap();
    assert_eq!(crb.entries.len(), 1);

    let loc = c.localize(&LocalizeRequest { perturb_seed: Some(3), ..Default::default() }).await.unwrap();
    assert_eq!(loc.results.len(), 4);
    assert!(loc.results.iter().all(|r| r.error_m.unwrap() < 1.0));

    let req = ExperimentRequest { n_trials: Some(5), grid: Some(vec![8.0, 16.0]), ..ExperimentRequest::preset("fig3") };
    let exp = c.experiment(&req).await.unwrap();
    assert_eq!(exp.rows.len(), 10);
    assert_eq!(exp.spec.n_trials, 5);
}

#[tokio::test]
async fn angles_from_ideal_observations() {
    let c = client().await;
    let req = AnglesRequest { ideal: true, noise_seed: Some(9), ..Default::default() };
    let r = c.angles(&req).await.unwrap();
    assert!(r.delays.is_empty());
    for a in &r.angles {
        let est = a.estimate.as_ref().unwrap();
        assert!(wrap_angle(est.theta_fused - r.true_angles[a.irs]).abs() < 0.05, "{a:?}");
    }
}

#[tokio::test]
async fn angles_through_the_waveform_pipeline() {
    let c = client().await;
    // 70 dBm: every pair is well above threshold, so only the half-sample grid rounding remains.
    let mut scene = SceneConfig::table1();
    scene.tx_power = 1e4;
    let req = AnglesRequest { scene: Some(scene.clone()), ..Default::default() };
    let r = c.angles(&req).await.unwrap();
    assert_eq!(r.delays.len(), 9);
    let half_sample = 0.5 / scene.bandwidth;
    for d in &r.delays {
        let truth = r.true_cascade_delays[d.pair.0 * 3 + d.pair.1];
        assert!((d.tau_hat - truth).abs() < half_sample + 1e-9, "{d:?} vs {truth}");
    }
    // Same numbers as calling the library directly, up to floating-point summation order.
    let local = irsloc_core::api::angles(req).unwrap();
    for (a, b) in local.delays.iter().zip(&r.delays) {
        assert_eq!((a.pair, a.grid_index), (b.pair, b.grid_index));
        assert!((a.tau_hat - b.tau_hat).abs() < 1e-12, "{a:?} vs {b:?}");
    }
    for (a, b) in local.angles.iter().zip(&r.angles) {
        let (ea, eb) = (a.estimate.unwrap(), b.estimate.unwrap());
        assert!((ea.theta_fused - eb.theta_fused).abs() < 1e-6, "{ea:?} vs {eb:?}");
    }
}

#[tokio::test]
async fn server_errors_surface_as_api_errors() {
    let c = client().await;
    let err = c.experiment(&ExperimentRequest::preset("nope")).await.unwrap_err();
    match &err {
        ClientError::Api { status, error } => assert_eq!((*status, error.kind.as_str()), (404, "unknown-preset")),
        other => panic!("unexpected {other}"),
    }
    assert!(err.api().is_some());
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let c = Client::new("http://127.0.0.1:9").unwrap();
    assert!(matches!(c.health().await, Err(ClientError::Transport(_))));
    assert!(matches!(Client::new("not a url"), Err(ClientError::Url(_))));
}
