use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use inflation_solver::{MembraneModel, SolverConfig};
use membrane_cli::protocol::{ClientMessage, DeltaKind, RejectReason, ServerMessage, SessionCreated};
use membrane_cli::server::{router, AppState};
use membrane_cli::{Command, Session, PROTOCOL_VERSION};
use membrane_core::design::{build_default_design, ClutchId};
use clutch_driver::Transition;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

fn coarse() -> SolverConfig {
    SolverConfig { mesh_edge_length: 0.01, ..SolverConfig::default() }
}

fn app() -> Arc<AppState> {
    AppState::new(build_default_design(), coarse())
}

async fn call(app: &Arc<AppState>, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn http_session_lifecycle() {
    let app = app();
    let (status, body) = call(&app, "POST", "/sessions", "").await;
    assert_eq!(status, StatusCode::CREATED);
    let created: SessionCreated = serde_json::from_value(body).unwrap();
    assert_eq!(created.v, PROTOCOL_VERSION);
    assert_eq!(created.live, format!("/sessions/{}/live", created.id));

    let (status, body) = call(&app, "GET", &format!("/sessions/{}", created.id), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["v"], PROTOCOL_VERSION);
    assert_eq!(body["session"]["id"], created.id.as_str());
    assert_eq!(body["session"]["pressure_pa"], 0.0);
    assert_eq!(body["session"]["busy"], false);
    assert_eq!(body["session"]["log"], json!([]));

    let (status, body) = call(&app, "GET", "/sessions/nope", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("nope"));
}

#[tokio::test]
async fn create_session_validates_its_body() {
    let app = app();
    let (status, _) = call(&app, "POST", "/sessions", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call(&app, "POST", "/sessions", r#"{"config": {"dt": -1.0}}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("dt"));
    let (status, _) = call(&app, "POST", "/sessions", r#"{"config": {"mesh_edge_length": 0.012}}"#).await;
    assert_eq!(status, StatusCode::CREATED);
}

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start() -> (String, Arc<AppState>) {
    let app = app();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let r = router(app.clone());
    tokio::spawn(async move { axum::serve(listener, r).await.unwrap() });
    (format!("127.0.0.1:{}", addr.port()), app)
}

async fn new_session(app: &Arc<AppState>) -> String {
    let (_, body) = call(app, "POST", "/sessions", "").await;
    body["id"].as_str().unwrap().to_string()
}

async fn connect(addr: &str, id: &str) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/live")).await.unwrap();
    ws
}

async fn recv(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(120), ws.next()).await.expect("server reply").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, text: String) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

async fn command(ws: &mut Ws, id: u64, command: Command) {
    send(ws, serde_json::to_string(&ClientMessage { v: PROTOCOL_VERSION, id, command }).unwrap()).await;
}

#[tokio::test]
async fn unknown_session_has_no_live_channel() {
    let (addr, _) = start().await;
    assert!(tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/missing/live")).await.is_err());
}

#[tokio::test]
async fn live_channel_rejections() {
    let (addr, app) = start().await;
    let id = new_session(&app).await;
    let mut ws = connect(&addr, &id).await;
    let ServerMessage::Hello { v, session, state } = recv(&mut ws).await else { panic!("hello first") };
    assert_eq!((v, session.id.as_str(), state.kind), (PROTOCOL_VERSION, id.as_str(), DeltaKind::Reset));

    send(&mut ws, "garbage".into()).await;
    assert!(matches!(recv(&mut ws).await, ServerMessage::Rejected { reason: RejectReason::Malformed, id: None, .. }));

    send(&mut ws, json!({ "v": 99, "id": 3, "type": "reset" }).to_string()).await;
    assert!(matches!(recv(&mut ws).await, ServerMessage::Rejected { reason: RejectReason::UnsupportedVersion, id: Some(3), .. }));

    command(&mut ws, 4, Command::ClutchEvent { clutch: ClutchId::Inboard, transition: Transition::Deactivate }).await;
    assert!(matches!(recv(&mut ws).await, ServerMessage::Rejected { reason: RejectReason::Illegal, id: Some(4), .. }));

    // Two pressure commands back to back: the second finds the session busy.
    command(&mut ws, 5, Command::SetPressure { pa: 3100.0 }).await;
    command(&mut ws, 6, Command::SetPressure { pa: 2000.0 }).await;
    let mut busy = None;
    let mut applied = None;
    while applied.is_none() {
        match recv(&mut ws).await {
            ServerMessage::Rejected { id: Some(6), reason, retry_after_ms, .. } => busy = Some((reason, retry_after_ms)),
            ServerMessage::Applied { entry, origin, .. } => applied = Some((entry, origin)),
            ServerMessage::Delta { delta, .. } => assert_eq!(delta.pressure_pa, 3100.0),
            other => panic!("unexpected {other:?}"),
        }
    }
    let (reason, retry) = busy.expect("second command rejected before the first finished");
    assert_eq!(reason, RejectReason::Busy);
    assert!(retry.unwrap() > 0);
    let (entry, origin) = applied.unwrap();
    assert_eq!(entry.seq, 1);
    assert_eq!(origin.unwrap().id, 5);
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}"), "").await;
    assert_eq!(body["session"]["log"].as_array().unwrap().len(), 1);
}

/// Headless client: Plateau, then Round, then release of the inboard clutch.
#[tokio::test]
async fn headless_client_round_trip_matches_direct_runs() {
    let (addr, app) = start().await;
    let id = new_session(&app).await;
    let mut ws = connect(&addr, &id).await;
    let mut watcher = connect(&addr, &id).await;
    assert!(matches!(recv(&mut ws).await, ServerMessage::Hello { .. }));
    assert!(matches!(recv(&mut watcher).await, ServerMessage::Hello { .. }));

    use ClutchId::*;
    use Transition::*;
    let ev = |clutch, transition| Command::ClutchEvent { clutch, transition };
    let schedule = vec![
        ev(OutboardN, Activate),
        ev(OutboardE, Activate),
        ev(OutboardS, Activate),
        ev(OutboardW, Activate),
        Command::SetPressure { pa: 3100.0 },
        ev(OutboardN, Deactivate),
        ev(OutboardE, Deactivate),
        ev(OutboardS, Deactivate),
        ev(OutboardW, Deactivate),
        ev(Inboard, Activate),
        Command::SetPressure { pa: 3100.0 },
        ev(Inboard, Deactivate),
        Command::TriggerTransient { duration: 0.05 },
    ];

    // The same schedule applied directly.
    let config = coarse();
    let model = Arc::new(MembraneModel::new(&build_default_design(), &config).unwrap());
    let mut direct = Session::new("direct", model);
    let mut expected = Vec::new();
    for c in &schedule {
        expected.extend(direct.apply(*c).unwrap().deltas);
    }

    let mut sent = Vec::new();
    let mut received = Vec::new();
    let mut watched = 0;
    for (k, c) in schedule.iter().enumerate() {
        // One command in flight at a time, as a UI would.
        command(&mut ws, k as u64, *c).await;
        sent.push(*c);
        loop {
            match recv(&mut ws).await {
                ServerMessage::Delta { delta, .. } => received.push(delta),
                ServerMessage::Applied { entry, origin, .. } => {
                    assert_eq!(origin.unwrap().id, k as u64);
                    assert_eq!(entry.command, *c);
                    break;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }
    while watched < received.len() {
        if let ServerMessage::Delta { .. } = recv(&mut watcher).await {
            watched += 1;
        }
    }

    assert_eq!(received.len(), expected.len());
    for (r, e) in received.iter().zip(&expected) {
        assert_eq!((r.seq, r.kind), (e.seq, e.kind));
        assert!((r.apex_mm - e.apex_mm).abs() <= 1e-9, "{} vs {}", r.apex_mm, e.apex_mm);
    }
    let plateau = received.iter().find(|d| d.seq == 5).unwrap();
    let round = received.iter().find(|d| d.seq == 11).unwrap();
    assert!(plateau.apex_mm < round.apex_mm);
    assert_eq!(received.last().unwrap().kind, DeltaKind::Frame);

    let (_, body) = call(&app, "GET", &format!("/sessions/{id}"), "").await;
    let log: Vec<membrane_cli::LogEntry> = serde_json::from_value(body["session"]["log"].clone()).unwrap();
    assert_eq!(log.iter().map(|e| e.command).collect::<Vec<_>>(), sent);
    assert_eq!(log, direct.log());
}
