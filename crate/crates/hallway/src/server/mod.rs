//! Telemetry and teleoperation over HTTP and WebSocket.
//!
//! One ticker task owns the [`Session`]. Handlers talk to it through an
//! ordered queue; it publishes status on a watch channel and telemetry on a
//! broadcast channel, where lagging clients skip messages instead of
//! holding up the tick.

mod protocol;
mod session;

pub use protocol::{ClientMsg, CmdRequest, CmdResponse, RecordRequest, ServerMsg};
pub use session::{CommandReply, Session, SessionConfig, Status, FRAME_HZ, NOT_PERMITTED, RECORD_SLOP};

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::error::{Error, Result};

const QUEUE: usize = 1024;
const TELEMETRY_BUFFER: usize = 64;

enum Request {
    Steer(f64),
    Record(bool, oneshot::Sender<Result<Status, String>>),
    Command(String, oneshot::Sender<CommandReply>),
}

#[derive(Clone)]
struct App {
    queue: mpsc::Sender<Request>,
    status: watch::Receiver<Status>,
    telemetry: broadcast::Sender<Arc<str>>,
    clients: Arc<AtomicUsize>,
    stop: watch::Receiver<bool>,
}

impl App {
    fn status(&self) -> Status {
        let mut s = self.status.borrow().clone();
        s.clients = self.clients.load(Ordering::Relaxed);
        s
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: watch::Sender<bool>,
    ticker: JoinHandle<()>,
    http: JoinHandle<()>,
}

impl ServerHandle {
    /// Stops the ticker (flushing any recording) and the listener.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        let _ = self.ticker.await;
        let _ = self.http.await;
    }

    /// Resolves when the server stops on its own (it only does on error).
    pub async fn wait(&mut self) {
        let _ = (&mut self.http).await;
    }
}

async fn run_ticker(
    mut session: Session,
    mut queue: mpsc::Receiver<Request>,
    status: watch::Sender<Status>,
    telemetry: broadcast::Sender<Arc<str>>,
    mut stop: watch::Receiver<bool>,
) {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(session.dt()));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.changed() => break,
        }
        while let Ok(req) = queue.try_recv() {
            match req {
                Request::Steer(v) => session.set_steer(v),
                Request::Record(on, reply) => {
                    let r = session.set_recording(on).map(|_| session.status()).map_err(|e| e.to_string());
                    let _ = reply.send(r);
                }
                Request::Command(line, reply) => {
                    let _ = reply.send(session.command(&line));
                }
            }
        }
        match session.tick() {
            Ok(msgs) => {
                for m in msgs {
                    let text = serde_json::to_string(&m).expect("telemetry serializes");
                    // No subscribers is fine.
                    let _ = telemetry.send(text.into());
                }
            }
            Err(e) => {
                eprintln!("recording stopped: {e}");
                let _ = session.set_recording(false);
            }
        }
        status.send_replace(session.status());
    }
    if let Err(e) = session.set_recording(false) {
        eprintln!("final flush failed: {e}");
    }
}

async fn get_state(State(app): State<App>) -> Json<Status> {
    Json(app.status())
}

async fn ask<T>(app: &App, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Option<T> {
    let (tx, rx) = oneshot::channel();
    app.queue.send(make(tx)).await.ok()?;
    rx.await.ok()
}

fn unavailable() -> (StatusCode, Json<CmdResponse>) {
    (StatusCode::SERVICE_UNAVAILABLE, Json(CmdResponse { out: "simulation stopped".into() }))
}

async fn post_record(
    State(app): State<App>,
    Json(req): Json<RecordRequest>,
) -> Result<Json<Status>, (StatusCode, Json<CmdResponse>)> {
    match ask(&app, |tx| Request::Record(req.on, tx)).await {
        Some(Ok(mut s)) => {
            s.clients = app.clients.load(Ordering::Relaxed);
            Ok(Json(s))
        }
        Some(Err(out)) => Err((StatusCode::INTERNAL_SERVER_ERROR, Json(CmdResponse { out }))),
        None => Err(unavailable()),
    }
}

async fn post_cmd(State(app): State<App>, Json(req): Json<CmdRequest>) -> (StatusCode, Json<CmdResponse>) {
    let Some(reply) = ask(&app, |tx| Request::Command(req.cmd, tx)).await else {
        return unavailable();
    };
    let code = match reply {
        CommandReply::Ok(_) => StatusCode::OK,
        CommandReply::Refused => StatusCode::FORBIDDEN,
        CommandReply::Failed(_) => StatusCode::UNPROCESSABLE_ENTITY,
    };
    (code, Json(CmdResponse { out: reply.text().to_string() }))
}

async fn stream(ws: WebSocketUpgrade, State(app): State<App>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

async fn client(socket: WebSocket, app: App) {
    app.clients.fetch_add(1, Ordering::Relaxed);
    let mut feed = app.telemetry.subscribe();
    let mut stop = app.stop.clone();
    let (mut sink, mut incoming) = socket.split();
    loop {
        tokio::select! {
            _ = stop.changed() => {
                let _ = sink.send(Message::Close(None)).await;
                break;
            }
            msg = feed.recv() => match msg {
                Ok(text) => {
                    if sink.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = incoming.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    if let Ok(ClientMsg::Steer { value }) = serde_json::from_str(text.as_str()) {
                        if app.queue.send(Request::Steer(value)).await.is_err() {
                            break;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    app.clients.fetch_sub(1, Ordering::Relaxed);
}

/// Binds `addr` (port 0 picks a free port) and starts ticking.
pub async fn start(cfg: SessionConfig, addr: &str) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await.map_err(|source| Error::Listen { addr: addr.into(), source })?;
    let local = listener.local_addr().map_err(|source| Error::Listen { addr: addr.into(), source })?;

    let session = Session::new(cfg);
    let (queue_tx, queue_rx) = mpsc::channel(QUEUE);
    let (status_tx, status_rx) = watch::channel(session.status());
    let (telemetry, _) = broadcast::channel(TELEMETRY_BUFFER);
    let (stop_tx, stop_rx) = watch::channel(false);

    let ticker = tokio::spawn(run_ticker(session, queue_rx, status_tx, telemetry.clone(), stop_rx.clone()));
    let app = App {
        queue: queue_tx,
        status: status_rx,
        telemetry,
        clients: Arc::new(AtomicUsize::new(0)),
        stop: stop_rx.clone(),
    };
    let router = Router::new()
        .route("/state", get(get_state))
        .route("/record", post(post_record))
        .route("/cmd", post(post_cmd))
        .route("/stream", get(stream))
        .with_state(app);
    let mut stop = stop_rx;
    let http = tokio::spawn(async move {
        let shutdown = async move {
            let _ = stop.changed().await;
        };
        if let Err(e) = axum::serve(listener, router).with_graceful_shutdown(shutdown).await {
            eprintln!("server error: {e}");
        }
    });
    Ok(ServerHandle { addr: local, stop: stop_tx, ticker, http })
}
