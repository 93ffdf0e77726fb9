//! WebSocket front end. A dedicated thread owns the [`DebugSession`];
//! connections forward text frames to it and relay replies in order.

use super::session::DebugSession;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use std::future::Future;
use std::sync::mpsc as std_mpsc;
use std::time::{Duration, Instant};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};

pub const DEFAULT_PORT: u16 = 9090;

struct Request {
    text: String,
    /// Response followed by any events the command produced.
    reply: oneshot::Sender<Vec<String>>,
}

#[derive(Clone)]
struct Shared {
    requests: std_mpsc::Sender<Request>,
    events: broadcast::Sender<String>,
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("protocol types serialize")
}

fn session_loop(mut session: DebugSession, rx: std_mpsc::Receiver<Request>, events: broadcast::Sender<String>) {
    loop {
        let now = Instant::now();
        let wait = session.next_tick(now).map(|t| t.saturating_duration_since(now));
        let req = match wait {
            None => match rx.recv() {
                Ok(r) => Some(r),
                Err(_) => return,
            },
            Some(d) => match rx.recv_timeout(d.min(Duration::from_millis(100))) {
                Ok(r) => Some(r),
                Err(std_mpsc::RecvTimeoutError::Timeout) => None,
                Err(std_mpsc::RecvTimeoutError::Disconnected) => return,
            },
        };
        if let Some(req) = req {
            let (resp, evs) = session.handle_text(&req.text, Instant::now());
            let mut frames = vec![to_json(&resp)];
            frames.extend(evs.iter().map(to_json));
            let _ = req.reply.send(frames);
        }
        for ev in session.tick(Instant::now()) {
            let _ = events.send(to_json(&ev));
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, shared))
}

async fn connection(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let mut events = shared.events.subscribe();
    let writer = tokio::spawn(async move {
        loop {
            let frame = tokio::select! {
                f = out_rx.recv() => match f { Some(f) => f, None => break },
                e = events.recv() => match e {
                    Ok(e) => e,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(frame)).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let (reply, wait) = oneshot::channel();
        if shared.requests.send(Request { text, reply }).is_err() {
            break;
        }
        let Ok(frames) = wait.await else { break };
        for f in frames {
            if out_tx.send(f).is_err() {
                break;
            }
        }
    }
    drop(out_tx);
    writer.abort();
}

pub fn router(session: DebugSession) -> Router {
    let (tx, rx) = std_mpsc::channel();
    let (events, _) = broadcast::channel(64);
    let ev = events.clone();
    std::thread::Builder::new()
        .name("debug-session".into())
        .spawn(move || session_loop(session, rx, ev))
        .expect("spawn session thread");
    Router::new().route("/debug", get(ws_handler)).with_state(Shared { requests: tx, events })
}

/// Serve `session` on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    session: DebugSession,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(session)).with_graceful_shutdown(shutdown).await
}
