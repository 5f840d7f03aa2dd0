//! HTTP + websocket session service.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use inflation_solver::{MembraneModel, SolverConfig};
use membrane_core::design::MembraneDesign;
use serde_json::json;
use tokio::sync::{broadcast, mpsc};

use crate::protocol::{ClientMessage, CreateSession, Origin, RejectReason, ServerMessage, SessionCreated, PROTOCOL_VERSION};
use crate::session::{Session, SharedSession};

/// Deltas buffered per session for slow subscribers.
const BROADCAST_CAPACITY: usize = 4096;

pub struct LiveSession {
    pub shared: Arc<SharedSession>,
    tx: broadcast::Sender<Arc<str>>,
}

pub struct AppState {
    design: MembraneDesign,
    config: SolverConfig,
    sessions: RwLock<HashMap<String, Arc<LiveSession>>>,
    next_connection: AtomicU64,
}

impl AppState {
    pub fn new(design: MembraneDesign, config: SolverConfig) -> Arc<Self> {
        Arc::new(AppState { design, config, sessions: RwLock::new(HashMap::new()), next_connection: AtomicU64::new(1) })
    }

    pub fn session(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/live", get(live))
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "v": PROTOCOL_VERSION, "error": message.into() }))).into_response()
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("request body: {e}")),
        }
    };
    let design = req.design.unwrap_or_else(|| app.design.clone());
    let config = req.config.unwrap_or_else(|| app.config.clone());
    if let Err(e) = design.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    if let Err(e) = config.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let built = {
        let id = id.clone();
        tokio::task::spawn_blocking(move || MembraneModel::new(&design, &config).map(|m| Session::new(id, Arc::new(m)))).await
    };
    let session = match built {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let live = Arc::new(LiveSession { shared: SharedSession::new(session), tx });
    app.sessions.write().expect("sessions lock").insert(id.clone(), live);
    tracing::info!(session = %id, "created");
    let created = SessionCreated { v: PROTOCOL_VERSION, live: format!("/sessions/{id}/live"), id };
    (StatusCode::CREATED, Json(created)).into_response()
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(live) => Json(json!({ "v": PROTOCOL_VERSION, "session": live.shared.summary() })).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no session {id}")),
    }
}

async fn live(State(app): State<Arc<AppState>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some(live) = app.session(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let connection = app.next_connection.fetch_add(1, Ordering::Relaxed);
    ws.on_upgrade(move |socket| connection_loop(socket, live, connection))
}

fn encode(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages serialize")
}

fn rejected(id: Option<u64>, reason: RejectReason, message: String, retry_after_ms: Option<u64>) -> String {
    encode(&ServerMessage::Rejected { v: PROTOCOL_VERSION, id, reason, message, retry_after_ms })
}

async fn connection_loop(socket: WebSocket, live: Arc<LiveSession>, connection: u64) {
    let (mut sink, mut stream) = socket.split();
    // Subscribe first so nothing published after the hello snapshot is lost.
    let mut updates = live.tx.subscribe();
    let hello = ServerMessage::Hello { v: PROTOCOL_VERSION, session: live.shared.summary(), state: live.shared.current() };
    if sink.send(Message::Text(encode(&hello).into())).await.is_err() {
        return;
    }
    let (direct_tx, mut direct) = mpsc::unbounded_channel::<String>();
    loop {
        let out = tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if let Some(reply) = handle_text(&live, connection, text.as_str(), &direct_tx) {
                        reply
                    } else {
                        continue;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
            update = updates.recv() => match update {
                Ok(text) => text.to_string(),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    rejected(None, RejectReason::Failed, format!("connection lagged; {n} updates dropped, reconnect to resync"), None)
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(text) = direct.recv() => text,
        };
        if sink.send(Message::Text(out.into())).await.is_err() {
            break;
        }
    }
    tracing::debug!(connection, "closed");
}

/// Starts a command; returns an immediate reply for rejections.
fn handle_text(live: &Arc<LiveSession>, connection: u64, text: &str, direct: &mpsc::UnboundedSender<String>) -> Option<String> {
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(text).ok().and_then(|v| v.get("id")?.as_u64());
            return Some(rejected(id, RejectReason::Malformed, e.to_string(), None));
        }
    };
    if msg.v != PROTOCOL_VERSION {
        return Some(rejected(
            Some(msg.id),
            RejectReason::UnsupportedVersion,
            format!("protocol version {} is not supported (server speaks {PROTOCOL_VERSION})", msg.v),
            None,
        ));
    }
    let ticket = match live.shared.try_begin() {
        Ok(t) => t,
        Err(e) => return Some(rejected(Some(msg.id), e.reason(), e.to_string(), e.retry_after_ms())),
    };
    let tx = live.tx.clone();
    let direct = direct.clone();
    tokio::task::spawn_blocking(move || {
        match ticket.run(msg.command) {
            Ok(applied) => {
                for delta in applied.deltas {
                    let _ = tx.send(encode(&ServerMessage::Delta { v: PROTOCOL_VERSION, delta }).into());
                }
                let origin = Some(Origin { connection, id: msg.id });
                let _ = tx.send(encode(&ServerMessage::Applied { v: PROTOCOL_VERSION, entry: applied.entry, origin }).into());
            }
            Err(e) => {
                let _ = direct.send(rejected(Some(msg.id), e.reason(), e.to_string(), e.retry_after_ms()));
            }
        }
        // Free the session only after its results are queued.
        drop(ticket);
    });
    None
}
