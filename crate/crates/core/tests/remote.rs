use std::sync::Arc;
use std::thread;

use hnc_icl::exemplar::Exemplar;
use hnc_icl::oracle::{
    CompletionOracle, HncOracle, RemoteConfig, RemoteOracle, WireRequest, WireResponse,
    REQUEST_ID_HEADER,
};
use hnc_icl::selection::{value_estimate, Subsample};
use hnc_icl::task::{generate_pool, ScoreFunction, TaskKind, TaskSpec};
use hnc_icl::Error;

/// Serve `handler` on a loopback port until the process exits.
fn serve<F>(handler: F) -> String
where
    F: Fn(Option<String>, String) -> String + Send + Sync + 'static,
{
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let addr = server.server_addr().to_ip().unwrap();
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let id = req
                .headers()
                .iter()
                .find(|h| h.field.equiv(REQUEST_ID_HEADER))
                .map(|h| h.value.to_string());
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let reply = handler(id, body);
            let _ = req.respond(tiny_http::Response::from_string(reply));
        }
    });
    format!("http://{addr}/complete")
}

#[test]
fn fixed_response_is_returned() {
    let url = serve(|_, _| r#"{"prediction":[0.25,-1.5]}"#.to_string());
    let oracle = RemoteOracle::new(RemoteConfig::new(url)).unwrap();
    let e = Exemplar::new(0, vec![1.0], vec![2.0, 3.0]);
    assert_eq!(oracle.predict(&[&e], &[0.5]).unwrap(), vec![0.25, -1.5]);
}

#[test]
fn malformed_body_names_the_request() {
    let url = serve(|_, _| "not json".to_string());
    let oracle = RemoteOracle::new(RemoteConfig::new(url)).unwrap();
    oracle.predict(&[], &[0.0]).unwrap_err();
    match oracle.predict(&[], &[0.0]) {
        Err(Error::Oracle { message, .. }) => {
            assert!(message.contains("request 1"), "{message}");
            assert!(message.contains("malformed"), "{message}");
        }
        other => panic!("expected oracle error, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_fails_after_retries() {
    let mut cfg = RemoteConfig::new("http://127.0.0.1:1/none");
    cfg.max_retries = 1;
    cfg.timeout_ms = 500;
    let err = RemoteOracle::new(cfg)
        .unwrap()
        .predict(&[], &[0.0])
        .unwrap_err();
    assert!(err.to_string().contains("after 2 attempts"), "{err}");
}

#[test]
fn loopback_hnc_service_matches_builtin() {
    let builtin = Arc::new(HncOracle::identity(4, 4, 8.0).unwrap());
    let served = builtin.clone();
    let url = serve(move |id, body| {
        assert!(id.is_some());
        let req: WireRequest = serde_json::from_str(&body).unwrap();
        let ctx: Vec<Exemplar> = req
            .exemplars
            .into_iter()
            .enumerate()
            .map(|(i, w)| Exemplar::new(i as u64, w.x, w.y))
            .collect();
        let refs: Vec<&Exemplar> = ctx.iter().collect();
        let prediction = served.predict(&refs, &req.query).unwrap();
        serde_json::to_string(&WireResponse { prediction }).unwrap()
    });
    let mut cfg = RemoteConfig::new(url);
    cfg.y_dim = Some(4);
    let remote = RemoteOracle::new(cfg).unwrap();

    let spec = TaskSpec::random(TaskKind::PrototypeCompletion, 4, 3, 0.1, 31).unwrap();
    let (pool, _) = generate_pool(&spec, 12, 0, 31).unwrap();
    for e in pool.iter().take(4) {
        let a = value_estimate(
            e,
            &pool,
            &*builtin,
            ScoreFunction::CosineScore,
            Subsample::All,
            0,
        )
        .unwrap();
        let b = value_estimate(
            e,
            &pool,
            &remote,
            ScoreFunction::CosineScore,
            Subsample::All,
            0,
        )
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }
}
