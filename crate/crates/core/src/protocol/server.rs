//! Network front end for a [`Hub`]: NDJSON over TCP and the same payloads
//! as WebSocket text frames.
//!
//! One loop task owns the hub. Connection tasks only forward lines to it
//! and write back what it sends, so ticks are never observed half-applied.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::Message as WsMessage;

use super::hub::{Hub, Outbound, SessionId};

pub const DEFAULT_TCP_PORT: u16 = 7777;
pub const DEFAULT_WS_PORT: u16 = 7778;
pub const WS_PATH: &str = "/ws";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    /// Wall-clock length of one tick; normally `1 / tick_rate`.
    pub tick_interval: Duration,
}

impl ServerConfig {
    pub fn new(tcp_port: u16, ws_port: u16, tick_rate: f64) -> Self {
        Self {
            tcp_addr: SocketAddr::from(([0, 0, 0, 0], tcp_port)),
            ws_addr: SocketAddr::from(([0, 0, 0, 0], ws_port)),
            tick_interval: Duration::from_secs_f64(1.0 / tick_rate),
        }
    }
}

enum Event {
    Connect(SessionId, mpsc::UnboundedSender<Outgoing>),
    Line(SessionId, String),
    Disconnect(SessionId),
}

enum Outgoing {
    Line(String),
    Close,
}

pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        for task in self.tasks.drain(..) {
            task.abort();
            let _ = task.await;
        }
    }

    /// Resolves when the hub loop ends.
    pub async fn wait(mut self) {
        if let Some(main) = self.tasks.first_mut() {
            let _ = main.await;
        }
    }
}

/// Binds both endpoints and starts serving. Ports of 0 pick free ports;
/// the bound addresses are on the handle.
pub async fn serve(hub: Hub, config: ServerConfig) -> io::Result<ServerHandle> {
    let tcp = TcpListener::bind(config.tcp_addr).await?;
    let ws = TcpListener::bind(config.ws_addr).await?;
    let tcp_addr = tcp.local_addr()?;
    let ws_addr = ws.local_addr()?;
    tracing::info!(%tcp_addr, %ws_addr, "serving");

    let (events, rx) = mpsc::unbounded_channel();
    let (shutdown_tx, shutdown_rx) = oneshot::channel();
    let main = tokio::spawn(hub_loop(hub, rx, config.tick_interval, shutdown_rx));
    let ids = std::sync::Arc::new(std::sync::atomic::AtomicU64::new(1));

    let tcp_task = tokio::spawn(accept_loop(tcp, events.clone(), ids.clone(), false));
    let ws_task = tokio::spawn(accept_loop(ws, events, ids, true));
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        shutdown: Some(shutdown_tx),
        tasks: vec![main, tcp_task, ws_task],
    })
}

async fn hub_loop(
    mut hub: Hub,
    mut events: mpsc::UnboundedReceiver<Event>,
    tick_interval: Duration,
    mut shutdown: oneshot::Receiver<()>,
) {
    let mut peers: HashMap<SessionId, mpsc::UnboundedSender<Outgoing>> = HashMap::new();
    let mut ticker = tokio::time::interval(tick_interval);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    ticker.tick().await;
    loop {
        let out = tokio::select! {
            _ = &mut shutdown => break,
            _ = ticker.tick() => {
                let mut out = hub.expire(Instant::now());
                out.extend(hub.tick());
                out
            }
            event = events.recv() => match event {
                None => break,
                Some(Event::Connect(id, tx)) => {
                    peers.insert(id, tx);
                    hub.connect(id, Instant::now());
                    Vec::new()
                }
                Some(Event::Line(id, line)) => hub.receive(id, &line),
                Some(Event::Disconnect(id)) => {
                    peers.remove(&id);
                    hub.disconnect(id);
                    Vec::new()
                }
            },
        };
        for action in out {
            match action {
                Outbound::Line(id, line) => {
                    if let Some(tx) = peers.get(&id) {
                        let _ = tx.send(Outgoing::Line(line));
                    }
                }
                Outbound::Close(id) => {
                    if let Some(tx) = peers.remove(&id) {
                        let _ = tx.send(Outgoing::Close);
                    }
                }
            }
        }
    }
    for tx in peers.into_values() {
        let _ = tx.send(Outgoing::Close);
    }
}

async fn accept_loop(
    listener: TcpListener,
    events: mpsc::UnboundedSender<Event>,
    ids: std::sync::Arc<std::sync::atomic::AtomicU64>,
    websocket: bool,
) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(err) => {
                tracing::warn!(%err, "accept failed");
                continue;
            }
        };
        let id = ids.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        tracing::debug!(%peer, id, websocket, "connection");
        let events = events.clone();
        tokio::spawn(async move {
            let result = if websocket {
                run_ws(stream, id, events.clone()).await
            } else {
                run_tcp(stream, id, events.clone()).await
            };
            if let Err(err) = result {
                tracing::debug!(id, %err, "connection ended with error");
            }
        });
    }
}

async fn run_tcp(
    stream: TcpStream,
    id: SessionId,
    events: mpsc::UnboundedSender<Event>,
) -> io::Result<()> {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let (tx, mut rx) = mpsc::unbounded_channel();
    let _ = events.send(Event::Connect(id, tx));
    let result = loop {
        tokio::select! {
            line = lines.next_line() => match line {
                Ok(Some(line)) => {
                    let _ = events.send(Event::Line(id, line));
                }
                Ok(None) => break Ok(()),
                Err(err) => break Err(err),
            },
            out = rx.recv() => match out {
                Some(Outgoing::Line(line)) => {
                    if let Err(err) = write.write_all(line.as_bytes()).await {
                        break Err(err);
                    }
                }
                Some(Outgoing::Close) | None => {
                    let _ = write.shutdown().await;
                    break Ok(());
                }
            },
        }
    };
    let _ = events.send(Event::Disconnect(id));
    result
}

async fn run_ws(
    stream: TcpStream,
    id: SessionId,
    events: mpsc::UnboundedSender<Event>,
) -> io::Result<()> {
    #[allow(clippy::result_large_err)]
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let ws = tokio_tungstenite::accept_hdr_async(stream, check_path)
        .await
        .map_err(io::Error::other)?;
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel();
    let _ = events.send(Event::Connect(id, tx));
    let result = loop {
        tokio::select! {
            frame = source.next() => match frame {
                Some(Ok(WsMessage::Text(text))) => {
                    let _ = events.send(Event::Line(id, text));
                }
                Some(Ok(WsMessage::Binary(bytes))) => {
                    let text = String::from_utf8_lossy(&bytes).into_owned();
                    let _ = events.send(Event::Line(id, text));
                }
                Some(Ok(WsMessage::Close(_))) | None => break Ok(()),
                Some(Ok(_)) => {}
                Some(Err(err)) => break Err(io::Error::other(err)),
            },
            out = rx.recv() => match out {
                Some(Outgoing::Line(line)) => {
                    let text = line.trim_end_matches('\n').to_owned();
                    if let Err(err) = sink.send(WsMessage::Text(text)).await {
                        break Err(io::Error::other(err));
                    }
                }
                Some(Outgoing::Close) | None => {
                    let _ = sink.send(WsMessage::Close(None)).await;
                    break Ok(());
                }
            },
        }
    };
    let _ = events.send(Event::Disconnect(id));
    result
}
