//! Driver server. Connection handlers only parse frames and queue
//! commands; a single tick task applies them to the room, advances the
//! clock and fans events out to subscribers.

use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use pixie_core::protocol::{
    decode, encode_string, Command, EnvironmentSnapshot, Envelope, RemoteError, TopicFilter,
    WorldHost, PROTOCOL_VERSION,
};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use crate::{DriverError, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TickMode {
    /// One tick every `tick_dt / time_scale` wall seconds.
    Realtime { time_scale: f64 },
    /// Ticks happen only through [`ServerHandle::tick`].
    Manual,
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub tick: TickMode,
    /// Commands applied per tick; the rest wait for later ticks in order.
    pub max_commands_per_tick: usize,
    /// Static files served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            tick: TickMode::Realtime { time_scale: 1.0 },
            max_commands_per_tick: 64,
            ui_dir: None,
        }
    }
}

enum Reply {
    Socket(u64),
    Http(oneshot::Sender<Result<Value, RemoteError>>),
}

struct Queued {
    id: String,
    cmd: Command,
    reply: Reply,
}

struct Conn {
    tx: mpsc::UnboundedSender<String>,
    filter: TopicFilter,
}

struct Shared {
    host: WorldHost,
    queue: VecDeque<Queued>,
    conns: BTreeMap<u64, Conn>,
    next_conn: u64,
    max_per_tick: usize,
}

impl Shared {
    fn send(&self, conn: u64, env: &Envelope) {
        if let Some(c) = self.conns.get(&conn) {
            let _ = c.tx.send(encode_string(env));
        }
    }

    /// Applies queued commands, advances one tick and publishes events.
    fn tick(&mut self) -> usize {
        let n = self.queue.len().min(self.max_per_tick);
        for q in self.queue.drain(..n).collect::<Vec<_>>() {
            let result = self.host.execute(&q.cmd);
            let t_s = self.host.clock_s();
            match q.reply {
                Reply::Socket(conn) => {
                    let env = match &result {
                        Ok(v) => Envelope::response(&q.id, t_s, v.clone()),
                        Err(e) => Envelope::error(&q.id, t_s, e),
                    };
                    self.send(conn, &env);
                }
                Reply::Http(tx) => {
                    let _ = tx.send(result);
                }
            }
        }
        self.host.advance();
        for frame in self.host.drain_events() {
            let text = encode_string(&frame.to_envelope());
            for c in self.conns.values() {
                if c.filter.matches(&frame.event) {
                    let _ = c.tx.send(text.clone());
                }
            }
        }
        n
    }
}

type SharedState = Arc<Mutex<Shared>>;

fn lock(s: &SharedState) -> MutexGuard<'_, Shared> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

/// Running server. Dropping it leaves the tasks running until
/// [`ServerHandle::shutdown`] is called.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: SharedState,
    stop: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    ticker: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Runs one tick by hand. Returns the number of commands applied.
    pub fn tick(&self) -> usize {
        lock(&self.shared).tick()
    }

    /// Commands waiting for the next tick.
    pub fn queued(&self) -> usize {
        lock(&self.shared).queue.len()
    }

    pub fn clock_s(&self) -> f64 {
        lock(&self.shared).host.clock_s()
    }

    pub fn snapshot(&self) -> EnvironmentSnapshot {
        lock(&self.shared).host.snapshot()
    }

    pub fn connections(&self) -> usize {
        lock(&self.shared).conns.len()
    }

    /// Waits until at least `n` commands are queued (manual mode helper).
    pub async fn wait_queued(&self, n: usize) {
        while self.queued() < n {
            tokio::time::sleep(Duration::from_millis(1)).await;
        }
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.ticker.take() {
            t.abort();
        }
        lock(&self.shared).conns.clear();
        if tokio::time::timeout(Duration::from_secs(2), &mut self.server).await.is_err() {
            self.server.abort();
        }
    }
}

/// Binds `bind` and starts serving the room held by `host`.
pub async fn serve(host: WorldHost, bind: &str, options: ServeOptions) -> Result<ServerHandle, DriverError> {
    let bind_err = |e: std::io::Error| DriverError::Bind { addr: bind.to_string(), message: e.to_string() };
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    let tick_dt = host.room().tick_dt_s();
    let shared = Arc::new(Mutex::new(Shared {
        host,
        queue: VecDeque::new(),
        conns: BTreeMap::new(),
        next_conn: 1,
        max_per_tick: options.max_commands_per_tick.max(1),
    }));

    let mut app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/env", get(http_env))
        .route("/chat", post(http_chat))
        .with_state(shared.clone());
    if let Some(dir) = &options.ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }

    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await;
    });

    let ticker = match options.tick {
        TickMode::Manual => None,
        TickMode::Realtime { time_scale } => {
            let period = Duration::from_secs_f64(tick_dt / time_scale.max(1e-6));
            let shared = shared.clone();
            Some(tokio::spawn(async move {
                let mut every = tokio::time::interval(period);
                every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                loop {
                    every.tick().await;
                    lock(&shared).tick();
                }
            }))
        }
    };

    Ok(ServerHandle { addr, shared, stop: Some(stop_tx), server, ticker })
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<SharedState>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, shared))
}

async fn connection(socket: WebSocket, shared: SharedState) {
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let conn = {
        let mut s = lock(&shared);
        let id = s.next_conn;
        s.next_conn += 1;
        s.conns.insert(id, Conn { tx, filter: TopicFilter::default() });
        id
    };
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(Ok(msg)) = stream.next().await {
        let bytes = match msg {
            Message::Text(t) => t.as_bytes().to_vec(),
            Message::Binary(b) => b.to_vec(),
            Message::Close(_) => break,
            _ => continue,
        };
        if let Some(reply) = handle_frame(&shared, conn, &bytes) {
            lock(&shared).send(conn, &reply);
        }
    }

    // the writer stops once its sender leaves the map
    lock(&shared).conns.remove(&conn);
    let _ = writer.await;
}

/// Answers what can be answered without touching the room and queues the
/// rest. Never closes the connection.
fn handle_frame(shared: &SharedState, conn: u64, bytes: &[u8]) -> Option<Envelope> {
    let mut s = lock(shared);
    let now = s.host.clock_s();
    let env = match decode(bytes) {
        Ok(env) => env,
        Err(e) => return Some(Envelope::error("", now, &RemoteError::new("bad_frame", e.to_string()))),
    };
    if env.v != PROTOCOL_VERSION {
        return Some(Envelope::error(&env.id, now, &RemoteError::version(env.v)));
    }
    let cmd = match Command::from_envelope(&env) {
        Ok(cmd) => cmd,
        Err(e) => return Some(Envelope::error(&env.id, now, &e)),
    };
    match cmd {
        Command::Hello { .. } => Some(match s.host.execute(&cmd) {
            Ok(v) => Envelope::response(&env.id, now, v),
            Err(e) => Envelope::error(&env.id, now, &e),
        }),
        Command::Subscribe { topics } => {
            let filter = TopicFilter::new(topics);
            let payload = json!({ "topics": filter.topics() });
            if let Some(c) = s.conns.get_mut(&conn) {
                c.filter = filter;
            }
            Some(Envelope::response(&env.id, now, payload))
        }
        cmd => {
            s.queue.push_back(Queued { id: env.id, cmd, reply: Reply::Socket(conn) });
            None
        }
    }
}

async fn queue_http(shared: &SharedState, cmd: Command) -> Response {
    let (tx, rx) = oneshot::channel();
    lock(shared).queue.push_back(Queued { id: String::new(), cmd, reply: Reply::Http(tx) });
    match tokio::time::timeout(DEFAULT_TIMEOUT, rx).await {
        Ok(Ok(Ok(v))) => Json(v).into_response(),
        Ok(Ok(Err(e))) => (StatusCode::BAD_REQUEST, Json(json!({ "code": e.code, "message": e.message }))).into_response(),
        _ => (StatusCode::SERVICE_UNAVAILABLE, "room did not answer").into_response(),
    }
}

async fn http_env(State(shared): State<SharedState>) -> Response {
    queue_http(&shared, Command::GetEnvironment {}).await
}

#[derive(Deserialize)]
struct ChatBody {
    from: String,
    text: String,
}

async fn http_chat(State(shared): State<SharedState>, Json(body): Json<ChatBody>) -> Response {
    queue_http(&shared, Command::SendChat { from: body.from, text: body.text }).await
}
