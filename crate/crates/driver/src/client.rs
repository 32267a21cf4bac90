//! Driver client: one WebSocket, correlated requests and an ordered event
//! queue. A dropped link is retried once, replaying the last subscription.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::stream::{SplitSink, SplitStream};
use futures_util::{SinkExt, StreamExt};
use pixie_core::protocol::{
    decode, encode_string, Command, Envelope, EventFrame, EventType, RemoteError, PROTOCOL_VERSION,
};
use serde::de::DeserializeOwned;
use serde_json::Value;
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::{DriverError, DEFAULT_TIMEOUT};

/// Gives a restarting server a moment to bind again.
const RECONNECT_PAUSE: Duration = Duration::from_millis(300);

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;
type Pending = Arc<Mutex<HashMap<String, oneshot::Sender<Result<Value, RemoteError>>>>>;

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub timeout: Duration,
    /// Version announced in the handshake.
    pub version: u32,
    pub reconnect: bool,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self { timeout: DEFAULT_TIMEOUT, version: PROTOCOL_VERSION, reconnect: true }
    }
}

struct Inner {
    addr: String,
    options: ClientOptions,
    next_id: AtomicU64,
    closed: AtomicBool,
    pending: Pending,
    outbox: Mutex<Option<mpsc::UnboundedSender<String>>>,
    topics: Mutex<Option<Vec<EventType>>>,
    events: tokio::sync::Mutex<mpsc::UnboundedReceiver<EventFrame>>,
}

/// Cheap to clone; clones share the socket and the event queue.
#[derive(Clone)]
pub struct DriverClient {
    inner: Arc<Inner>,
}

fn url(addr: &str) -> String {
    if addr.starts_with("ws://") || addr.starts_with("wss://") {
        addr.to_string()
    } else {
        format!("ws://{addr}/ws")
    }
}

/// Opens a socket and completes the version handshake (and an optional
/// resubscription) before anything else reads from it.
async fn open(
    addr: &str,
    options: &ClientOptions,
    topics: Option<Vec<EventType>>,
    events: &mpsc::UnboundedSender<EventFrame>,
) -> Result<Ws, DriverError> {
    let connect = |message: String| DriverError::Connect { addr: addr.to_string(), message };
    let (mut ws, _) = tokio::time::timeout(options.timeout, connect_async(url(addr)))
        .await
        .map_err(|_| connect("timed out".into()))?
        .map_err(|e| connect(e.to_string()))?;
    let hello = call_inline(&mut ws, options, Command::Hello { v: options.version }, events).await;
    match hello {
        Err(DriverError::Remote(e)) if e.code == "version" => return Err(DriverError::Version(e.message)),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    if let Some(topics) = topics {
        call_inline(&mut ws, options, Command::Subscribe { topics }, events).await?;
    }
    Ok(ws)
}

async fn call_inline(
    ws: &mut Ws,
    options: &ClientOptions,
    cmd: Command,
    events: &mpsc::UnboundedSender<EventFrame>,
) -> Result<Value, DriverError> {
    let id = format!("_{}", cmd.type_name());
    let mut env = cmd.to_envelope(id.clone(), 0.0);
    env.v = options.version;
    ws.send(Message::Text(encode_string(&env).into())).await.map_err(|_| DriverError::Lost)?;
    let wait = async {
        while let Some(msg) = ws.next().await {
            let Ok(Message::Text(text)) = msg else { continue };
            let Ok(env) = decode(text.as_bytes()) else { continue };
            if env.is_response() && env.id == id {
                return env.into_result().map_err(DriverError::from);
            }
            if let Ok(frame) = EventFrame::from_envelope(&env) {
                let _ = events.send(frame);
            }
        }
        Err(DriverError::Lost)
    };
    tokio::time::timeout(options.timeout, wait).await.map_err(|_| DriverError::Timeout(options.timeout))?
}

impl DriverClient {
    pub async fn connect(addr: &str) -> Result<Self, DriverError> {
        Self::connect_with(addr, ClientOptions::default()).await
    }

    pub async fn connect_with(addr: &str, options: ClientOptions) -> Result<Self, DriverError> {
        let (ev_tx, ev_rx) = mpsc::unbounded_channel();
        let ws = open(addr, &options, None, &ev_tx).await?;
        let inner = Arc::new(Inner {
            addr: addr.to_string(),
            options,
            next_id: AtomicU64::new(1),
            closed: AtomicBool::new(false),
            pending: Arc::default(),
            outbox: Mutex::new(None),
            topics: Mutex::new(None),
            events: tokio::sync::Mutex::new(ev_rx),
        });
        let (sink, stream) = ws.split();
        attach(&inner, sink);
        tokio::spawn(supervise(inner.clone(), stream, ev_tx));
        Ok(Self { inner })
    }

    /// Sends a command and waits for its response.
    pub async fn request(&self, cmd: Command) -> Result<Value, DriverError> {
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        let (tx, rx) = oneshot::channel();
        self.inner.pending.lock().unwrap().insert(id.clone(), tx);
        if let Command::Subscribe { topics } = &cmd {
            *self.inner.topics.lock().unwrap() = Some(topics.clone());
        }
        let text = encode_string(&cmd.to_envelope(id.clone(), 0.0));
        let sent = self.inner.outbox.lock().unwrap().as_ref().is_some_and(|o| o.send(text).is_ok());
        if !sent {
            self.inner.pending.lock().unwrap().remove(&id);
            return Err(DriverError::Lost);
        }
        let timeout = self.inner.options.timeout;
        match tokio::time::timeout(timeout, rx).await {
            Ok(Ok(result)) => result.map_err(DriverError::from),
            Ok(Err(_)) => Err(DriverError::Lost),
            Err(_) => {
                self.inner.pending.lock().unwrap().remove(&id);
                Err(DriverError::Timeout(timeout))
            }
        }
    }

    /// Like [`request`](Self::request) with the payload decoded.
    pub async fn request_as<T: DeserializeOwned>(&self, cmd: Command) -> Result<T, DriverError> {
        let v = self.request(cmd).await?;
        serde_json::from_value(v).map_err(|e| DriverError::Payload(e.to_string()))
    }

    pub async fn subscribe(&self, topics: Vec<EventType>) -> Result<(), DriverError> {
        self.request(Command::Subscribe { topics }).await.map(|_| ())
    }

    /// Next event in room order. `None` once the link is gone for good.
    pub async fn next_event(&self) -> Option<EventFrame> {
        self.inner.events.lock().await.recv().await
    }

    pub fn addr(&self) -> &str {
        &self.inner.addr
    }

    /// Closes the socket; pending and future requests fail with `Lost`.
    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::Relaxed);
        self.inner.outbox.lock().unwrap().take();
    }
}

fn attach(inner: &Inner, mut sink: SplitSink<Ws, Message>) {
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    *inner.outbox.lock().unwrap() = Some(tx);
    tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
}

fn fail_pending(pending: &Pending) {
    // dropping the senders wakes every waiter with Lost
    pending.lock().unwrap().clear();
}

async fn supervise(inner: Arc<Inner>, mut stream: SplitStream<Ws>, events: mpsc::UnboundedSender<EventFrame>) {
    let mut reconnects_left = usize::from(inner.options.reconnect);
    loop {
        read_loop(&inner, &mut stream, &events).await;
        // requests issued while the link is down fail fast instead of timing out
        inner.outbox.lock().unwrap().take();
        fail_pending(&inner.pending);
        if inner.closed.load(Ordering::Relaxed) || reconnects_left == 0 {
            break;
        }
        reconnects_left -= 1;
        tokio::time::sleep(RECONNECT_PAUSE).await;
        let topics = inner.topics.lock().unwrap().clone();
        match open(&inner.addr, &inner.options, topics, &events).await {
            Ok(ws) => {
                let (sink, s) = ws.split();
                attach(&inner, sink);
                stream = s;
            }
            Err(_) => break,
        }
    }
    inner.outbox.lock().unwrap().take();
    fail_pending(&inner.pending);
}

async fn read_loop(inner: &Inner, stream: &mut SplitStream<Ws>, events: &mpsc::UnboundedSender<EventFrame>) {
    while let Some(msg) = stream.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) | Err(_) => return,
            Ok(_) => continue,
        };
        let Ok(env) = decode(text.as_bytes()) else { continue };
        if env.is_response() {
            let waiter = inner.pending.lock().unwrap().remove(&env.id);
            if let Some(tx) = waiter {
                let _ = tx.send(env.into_result());
            }
        } else if let Ok(frame) = EventFrame::from_envelope(&env) {
            let _ = events.send(frame);
        }
    }
}

/// Sends a raw frame and returns the first response with the same id.
/// Meant for probing servers with hand-made or invalid frames.
pub async fn raw_exchange(addr: &str, frame: &str, id: &str) -> Result<Envelope, DriverError> {
    let connect = |message: String| DriverError::Connect { addr: addr.to_string(), message };
    let (mut ws, _) = connect_async(url(addr)).await.map_err(|e| connect(e.to_string()))?;
    ws.send(Message::Text(frame.to_string().into())).await.map_err(|_| DriverError::Lost)?;
    while let Some(Ok(msg)) = ws.next().await {
        if let Message::Text(t) = msg {
            if let Ok(env) = decode(t.as_bytes()) {
                if env.is_response() && env.id == id {
                    return Ok(env);
                }
            }
        }
    }
    Err(DriverError::Lost)
}
