//! Agent driver wire protocol.
//!
//! Every frame is one JSON object `{v, id, t_s, type, payload}`; event
//! frames add a room-wide sequence number `seq`. Requests carry a
//! correlation id that the matching `Response` or `Error` frame echoes.
//! Events carry an empty id and the room clock.

mod host;
mod messages;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use host::WorldHost;
pub use messages::{
    Command, EnvironmentSnapshot, Event, EventFrame, EventType, JoinSpec, NavPointInfo,
    TopicFilter, UserInfo,
};

pub const PROTOCOL_VERSION: u32 = 1;
pub const RESPONSE_TYPE: &str = "Response";
pub const ERROR_TYPE: &str = "Error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    pub id: String,
    pub t_s: f64,
    #[serde(rename = "type")]
    pub kind: String,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

impl Envelope {
    pub fn response(id: &str, t_s: f64, payload: Value) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id: id.to_string(),
            t_s,
            kind: RESPONSE_TYPE.to_string(),
            payload,
            seq: None,
        }
    }

    pub fn error(id: &str, t_s: f64, err: &RemoteError) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id: id.to_string(),
            t_s,
            kind: ERROR_TYPE.to_string(),
            payload: json!({ "code": err.code, "message": err.message }),
            seq: None,
        }
    }

    pub fn is_response(&self) -> bool {
        self.kind == RESPONSE_TYPE || self.kind == ERROR_TYPE
    }

    /// Splits a response frame into its result.
    pub fn into_result(self) -> Result<Value, RemoteError> {
        if self.kind == ERROR_TYPE {
            Err(serde_json::from_value(self.payload)
                .unwrap_or_else(|_| RemoteError::new("bad_frame", "malformed error payload")))
        } else {
            Ok(self.payload)
        }
    }
}

/// Error returned to a peer as an `Error` frame.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct RemoteError {
    pub code: String,
    pub message: String,
}

impl RemoteError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn version(got: u32) -> Self {
        Self::new(
            "version",
            format!("protocol version {got} not supported (server speaks {PROTOCOL_VERSION})"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot decode frame at byte {offset}: {message}")]
pub struct DecodeError {
    pub offset: usize,
    pub message: String,
}

pub fn encode(envelope: &Envelope) -> Vec<u8> {
    serde_json::to_vec(envelope).expect("envelope serializes")
}

pub fn encode_string(envelope: &Envelope) -> String {
    serde_json::to_string(envelope).expect("envelope serializes")
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, DecodeError> {
    serde_json::from_slice(bytes).map_err(|e| DecodeError {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut start = 0;
    for _ in 1..line {
        match bytes[start..].iter().position(|b| *b == b'\n') {
            Some(i) => start += i + 1,
            None => return bytes.len(),
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}
