//! Network transports for the hub: a plain TCP line endpoint and a
//! WebSocket endpoint at `/ws` carrying the same lines as text frames.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use log::{info, warn};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

use super::hub::{Delivery, Hub};
use crate::engine::ConnId;

/// Outbound queue depth per connection; a consumer this far behind is
/// disconnected.
pub const OUTBOUND_QUEUE: usize = 1000;

#[derive(Debug, Error)]
#[error("cannot bind port {port}: {source}")]
pub struct BindError {
    pub port: u16,
    #[source]
    pub source: std::io::Error,
}

/// Listeners bound ahead of running, so bind failures surface before any
/// session state is created.
pub struct Bound {
    tcp: TcpListener,
    ws: TcpListener,
}

impl Bound {
    pub fn tcp_addr(&self) -> std::io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    pub fn ws_addr(&self) -> std::io::Result<SocketAddr> {
        self.ws.local_addr()
    }
}

pub async fn bind(host: &str, port: u16, ws_port: u16) -> Result<Bound, BindError> {
    let tcp = TcpListener::bind((host, port))
        .await
        .map_err(|source| BindError { port, source })?;
    let ws = TcpListener::bind((host, ws_port))
        .await
        .map_err(|source| BindError {
            port: ws_port,
            source,
        })?;
    Ok(Bound { tcp, ws })
}

#[derive(Debug)]
enum Outgoing {
    Line(Arc<str>),
    Close,
}

enum HubMsg {
    Open {
        tx: mpsc::Sender<Outgoing>,
        reply: oneshot::Sender<ConnId>,
    },
    Line {
        conn: ConnId,
        line: String,
    },
    Gone {
        conn: ConnId,
    },
}

type HubTx = mpsc::UnboundedSender<HubMsg>;

/// Serves until `shutdown` resolves. The hub's log is written line by line
/// as events happen, so nothing is pending when this returns.
pub async fn run<F>(bound: Bound, hub: Hub, tick: Duration, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send,
{
    let (hub_tx, hub_rx) = mpsc::unbounded_channel();
    let tcp_task = tokio::spawn(accept_tcp(bound.tcp, hub_tx.clone()));
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .with_state(hub_tx.clone());
    let ws_task = tokio::spawn(async move {
        if let Err(e) = axum::serve(bound.ws, app).await {
            warn!("websocket endpoint stopped: {e}");
        }
    });
    drop(hub_tx);

    hub_loop(hub, hub_rx, tick, shutdown).await;
    tcp_task.abort();
    ws_task.abort();
    Ok(())
}

async fn hub_loop<F>(
    mut hub: Hub,
    mut rx: mpsc::UnboundedReceiver<HubMsg>,
    tick: Duration,
    shutdown: F,
) where
    F: Future<Output = ()>,
{
    let epoch = Instant::now();
    let now_us = || epoch.elapsed().as_micros() as i64;
    let mut writers: HashMap<ConnId, mpsc::Sender<Outgoing>> = HashMap::new();
    let mut ticker = tokio::time::interval(tick);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    tokio::pin!(shutdown);

    loop {
        let deliveries = tokio::select! {
            _ = &mut shutdown => break,
            _ = ticker.tick() => hub.on_tick(now_us()),
            msg = rx.recv() => match msg {
                None => break,
                Some(HubMsg::Open { tx, reply }) => {
                    let id = hub.connect();
                    writers.insert(id, tx);
                    let _ = reply.send(id);
                    Vec::new()
                }
                Some(HubMsg::Line { conn, line }) => hub.on_line(conn, now_us(), &line),
                Some(HubMsg::Gone { conn }) => {
                    hub.disconnect(conn);
                    writers.remove(&conn);
                    Vec::new()
                }
            },
        };
        // One allocation per distinct line, shared by all recipients.
        let mut shared: Option<(String, Arc<str>)> = None;
        for d in deliveries {
            match d {
                Delivery::Line { conn, line } => {
                    let payload = match &shared {
                        Some((text, arc)) if *text == line => arc.clone(),
                        _ => {
                            let arc: Arc<str> = Arc::from(line.as_str());
                            shared = Some((line, arc.clone()));
                            arc
                        }
                    };
                    let Some(tx) = writers.get(&conn) else {
                        continue;
                    };
                    if tx.try_send(Outgoing::Line(payload)).is_err() {
                        warn!("conn {conn}: outbound queue full or closed, disconnecting");
                        writers.remove(&conn);
                        hub.disconnect(conn);
                    }
                }
                Delivery::Close { conn } => {
                    if let Some(tx) = writers.remove(&conn) {
                        let _ = tx.try_send(Outgoing::Close);
                    }
                }
            }
        }
    }
    info!("session {} shutting down", hub.session_id());
}

async fn register(hub_tx: &HubTx) -> Option<(ConnId, mpsc::Receiver<Outgoing>)> {
    let (tx, rx) = mpsc::channel(OUTBOUND_QUEUE);
    let (reply_tx, reply_rx) = oneshot::channel();
    hub_tx
        .send(HubMsg::Open {
            tx,
            reply: reply_tx,
        })
        .ok()?;
    let id = reply_rx.await.ok()?;
    Some((id, rx))
}

async fn accept_tcp(listener: TcpListener, hub_tx: HubTx) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                info!("tcp connection from {peer}");
                tokio::spawn(tcp_conn(stream, hub_tx.clone()));
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

async fn tcp_conn(stream: TcpStream, hub_tx: HubTx) {
    let Some((id, mut out_rx)) = register(&hub_tx).await else {
        return;
    };
    let (read_half, mut write_half) = stream.into_split();
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            match msg {
                Outgoing::Line(line) => {
                    let mut buf = Vec::with_capacity(line.len() + 1);
                    buf.extend_from_slice(line.as_bytes());
                    buf.push(b'\n');
                    if write_half.write_all(&buf).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close => break,
            }
        }
        let _ = write_half.shutdown().await;
    });
    let mut lines = BufReader::new(read_half).lines();
    loop {
        tokio::select! {
            line = lines.next_line() => match line {
                Ok(Some(line)) => {
                    if hub_tx.send(HubMsg::Line { conn: id, line }).is_err() {
                        break;
                    }
                }
                _ => break,
            },
            _ = writer_finished(&writer) => break,
        }
    }
    let _ = hub_tx.send(HubMsg::Gone { conn: id });
    let _ = writer.await;
}

async fn writer_finished(handle: &tokio::task::JoinHandle<()>) {
    while !handle.is_finished() {
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(hub_tx): State<HubTx>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| ws_conn(socket, hub_tx))
}

async fn ws_conn(socket: WebSocket, hub_tx: HubTx) {
    let Some((id, mut out_rx)) = register(&hub_tx).await else {
        return;
    };
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            match msg {
                Outgoing::Line(line) => {
                    if sink.send(Message::Text(line.to_string())).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            }
        }
    });
    loop {
        tokio::select! {
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    for line in text.lines().filter(|l| !l.trim().is_empty()) {
                        if hub_tx.send(HubMsg::Line { conn: id, line: line.to_string() }).is_err() {
                            break;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            _ = writer_finished(&writer) => break,
        }
    }
    let _ = hub_tx.send(HubMsg::Gone { conn: id });
    let _ = writer.await;
}
