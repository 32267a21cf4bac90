//! Networked side of the agent driver: a WebSocket server wrapped around a
//! [`WorldHost`](pixie_core::protocol::WorldHost), a client for it, and an
//! agent loop that drives an [`AgentRuntime`](pixie_core::agent::AgentRuntime)
//! over that client.
//!
//! Every frame on the socket is one JSON text message holding an
//! [`Envelope`](pixie_core::protocol::Envelope).

mod agent;
mod client;
mod external;
mod server;

use std::time::Duration;

use pixie_core::protocol::RemoteError;
use thiserror::Error;

pub use agent::{run_agent, AgentOutcome, AgentSession, RunAgentConfig};
pub use client::{raw_exchange, ClientOptions, DriverClient};
pub use external::ExternalBackend;
pub use server::{serve, ServeOptions, ServerHandle, TickMode};

/// Address used when neither a flag nor `PIXIE_ADDR` says otherwise.
pub const DEFAULT_ADDR: &str = "127.0.0.1:7411";
pub const ADDR_ENV: &str = "PIXIE_ADDR";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// `PIXIE_ADDR` if set, else [`DEFAULT_ADDR`].
pub fn addr_from_env() -> String {
    std::env::var(ADDR_ENV).unwrap_or_else(|_| DEFAULT_ADDR.to_string())
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("cannot connect to {addr}: {message}")]
    Connect { addr: String, message: String },
    #[error("incompatible protocol: {0}")]
    Version(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("connection to driver lost")]
    Lost,
    #[error("unexpected payload: {0}")]
    Payload(String),
}
