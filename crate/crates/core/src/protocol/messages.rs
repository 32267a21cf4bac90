use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Envelope, RemoteError, PROTOCOL_VERSION};
use crate::world::{AvatarKind, AvatarSample, Target};

/// Avatar description carried by `Join`. Missing coordinates mean "spawn".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub id: String,
    pub kind: AvatarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

/// Commands a driver client may issue. `Hello` is the version handshake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum Command {
    Hello { v: u32 },
    GetEnvironment {},
    SetDestination { avatar_id: String, target: Target },
    GetPathStatus { avatar_id: String },
    SetPosition { avatar_id: String, x: f64, y: f64 },
    SetHeading { avatar_id: String, rad: f64 },
    SendChat { from: String, text: String },
    PlayEmote { from: String, emote: String },
    SetStatusText { avatar_id: String, text: String },
    Join { avatar: JoinSpec },
    Leave { avatar_id: String },
    Subscribe { topics: Vec<EventType> },
}

impl Command {
    pub const TYPES: [&'static str; 12] = [
        "Hello",
        "GetEnvironment",
        "SetDestination",
        "GetPathStatus",
        "SetPosition",
        "SetHeading",
        "SendChat",
        "PlayEmote",
        "SetStatusText",
        "Join",
        "Leave",
        "Subscribe",
    ];

    pub fn type_name(&self) -> &'static str {
        match self {
            Command::Hello { .. } => "Hello",
            Command::GetEnvironment {} => "GetEnvironment",
            Command::SetDestination { .. } => "SetDestination",
            Command::GetPathStatus { .. } => "GetPathStatus",
            Command::SetPosition { .. } => "SetPosition",
            Command::SetHeading { .. } => "SetHeading",
            Command::SendChat { .. } => "SendChat",
            Command::PlayEmote { .. } => "PlayEmote",
            Command::SetStatusText { .. } => "SetStatusText",
            Command::Join { .. } => "Join",
            Command::Leave { .. } => "Leave",
            Command::Subscribe { .. } => "Subscribe",
        }
    }

    pub fn to_envelope(&self, id: impl Into<String>, t_s: f64) -> Envelope {
        let (kind, payload) = split_tagged(serde_json::to_value(self).expect("command serializes"));
        Envelope {
            v: PROTOCOL_VERSION,
            id: id.into(),
            t_s,
            kind,
            payload,
            seq: None,
        }
    }

    /// Interprets an envelope as a command. Unknown types and payloads that
    /// do not fit the type's schema are reported as remote errors.
    pub fn from_envelope(env: &Envelope) -> Result<Command, RemoteError> {
        if !Self::TYPES.contains(&env.kind.as_str()) {
            return Err(RemoteError::new(
                "unknown_type",
                format!("unknown command type {:?}", env.kind),
            ));
        }
        join_tagged(&env.kind, &env.payload)
            .map_err(|e| RemoteError::new("bad_payload", format!("{}: {e}", env.kind)))
    }
}

/// Event topics; subscription is by event type name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    UserEntered,
    UserExited,
    ChatReceived,
    DestinationReached,
    PathBlocked,
    EmotePlayed,
    TickUpdate,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::UserEntered,
        EventType::UserExited,
        EventType::ChatReceived,
        EventType::DestinationReached,
        EventType::PathBlocked,
        EventType::EmotePlayed,
        EventType::TickUpdate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventType::UserEntered => "UserEntered",
            EventType::UserExited => "UserExited",
            EventType::ChatReceived => "ChatReceived",
            EventType::DestinationReached => "DestinationReached",
            EventType::PathBlocked => "PathBlocked",
            EventType::EmotePlayed => "EmotePlayed",
            EventType::TickUpdate => "TickUpdate",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum Event {
    UserEntered { avatar_id: String, kind: AvatarKind },
    UserExited { avatar_id: String, kind: AvatarKind },
    ChatReceived { from: String, text: String },
    DestinationReached { avatar_id: String },
    PathBlocked { avatar_id: String },
    EmotePlayed { from: String, emote: String },
    TickUpdate { avatars: Vec<AvatarSample> },
}

impl Event {
    pub fn event_type(&self) -> EventType {
        match self {
            Event::UserEntered { .. } => EventType::UserEntered,
            Event::UserExited { .. } => EventType::UserExited,
            Event::ChatReceived { .. } => EventType::ChatReceived,
            Event::DestinationReached { .. } => EventType::DestinationReached,
            Event::PathBlocked { .. } => EventType::PathBlocked,
            Event::EmotePlayed { .. } => EventType::EmotePlayed,
            Event::TickUpdate { .. } => EventType::TickUpdate,
        }
    }

    pub fn from_envelope(env: &Envelope) -> Result<Event, RemoteError> {
        if !EventType::ALL.iter().any(|t| t.name() == env.kind) {
            return Err(RemoteError::new("unknown_type", format!("unknown event type {:?}", env.kind)));
        }
        join_tagged(&env.kind, &env.payload)
            .map_err(|e| RemoteError::new("bad_payload", format!("{}: {e}", env.kind)))
    }
}

/// An event stamped with the room clock and the room-wide sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub seq: u64,
    pub t_s: f64,
    pub event: Event,
}

impl EventFrame {
    pub fn to_envelope(&self) -> Envelope {
        let (kind, payload) =
            split_tagged(serde_json::to_value(&self.event).expect("event serializes"));
        Envelope {
            v: PROTOCOL_VERSION,
            id: String::new(),
            t_s: self.t_s,
            kind,
            payload,
            seq: Some(self.seq),
        }
    }

    pub fn from_envelope(env: &Envelope) -> Result<EventFrame, RemoteError> {
        Ok(EventFrame {
            seq: env.seq.unwrap_or(0),
            t_s: env.t_s,
            event: Event::from_envelope(env)?,
        })
    }
}

/// Set of subscribed event types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFilter(Vec<EventType>);

impl Default for TopicFilter {
    /// Everything except the high-rate `TickUpdate`.
    fn default() -> Self {
        TopicFilter(
            EventType::ALL
                .into_iter()
                .filter(|t| *t != EventType::TickUpdate)
                .collect(),
        )
    }
}

impl TopicFilter {
    pub fn new(mut topics: Vec<EventType>) -> Self {
        topics.sort();
        topics.dedup();
        TopicFilter(topics)
    }

    pub fn all() -> Self {
        TopicFilter(EventType::ALL.to_vec())
    }

    pub fn matches(&self, event: &Event) -> bool {
        self.0.contains(&event.event_type())
    }

    pub fn topics(&self) -> &[EventType] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavPointInfo {
    pub id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInfo {
    pub id: String,
    pub kind: AvatarKind,
    pub x: f64,
    pub y: f64,
}

/// Atomic view of the room taken between two ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSnapshot {
    pub room: BTreeMap<String, String>,
    pub nav_points: Vec<NavPointInfo>,
    pub users: Vec<UserInfo>,
    pub clock_s: f64,
}

impl EnvironmentSnapshot {
    pub fn nav_point(&self, id: &str) -> Option<&NavPointInfo> {
        self.nav_points.iter().find(|p| p.id == id)
    }
}

fn split_tagged(value: Value) -> (String, Value) {
    let Value::Object(mut map) = value else {
        unreachable!("adjacently tagged enums serialize to objects")
    };
    let kind = match map.remove("type") {
        Some(Value::String(s)) => s,
        _ => unreachable!("tag is a string"),
    };
    let payload = map.remove("payload").unwrap_or_else(|| json!({}));
    (kind, payload)
}

fn join_tagged<T: serde::de::DeserializeOwned>(
    kind: &str,
    payload: &Value,
) -> Result<T, serde_json::Error> {
    let payload = if payload.is_null() { json!({}) } else { payload.clone() };
    serde_json::from_value(json!({ "type": kind, "payload": payload }))
}
