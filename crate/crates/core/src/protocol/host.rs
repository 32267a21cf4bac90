use std::sync::Arc;

use serde_json::{json, Value};

use super::messages::{
    Command, EnvironmentSnapshot, Event, EventFrame, NavPointInfo, UserInfo,
};
use super::{RemoteError, PROTOCOL_VERSION};
use crate::world::{Avatar, Position, RoomInstance, WorldError, WorldEvent, WorldEventKind, WorldSpec};

impl From<WorldError> for RemoteError {
    fn from(e: WorldError) -> Self {
        let code = match &e {
            WorldError::Parse(_) | WorldError::Validation { .. } => "bad_payload",
            WorldError::OutOfBounds(_) => "out_of_bounds",
            WorldError::NoPath => "no_path",
            WorldError::Unwalkable(_) => "unwalkable",
            WorldError::UnknownAvatar(_) => "unknown_avatar",
            WorldError::UnknownNavPoint(_) => "unknown_nav_point",
            WorldError::DuplicateAvatarId(_) => "duplicate_avatar",
        };
        RemoteError::new(code, e.to_string())
    }
}

/// World side of the driver: applies commands to a room and turns room
/// events into sequenced protocol events.
///
/// The host is the single writer of its room. Transports (in-process or
/// network) call [`WorldHost::execute`] in arrival order and
/// [`WorldHost::advance`] once per tick.
#[derive(Debug)]
pub struct WorldHost {
    room: RoomInstance,
    next_seq: u64,
    outbox: Vec<EventFrame>,
}

impl WorldHost {
    pub fn new(room: RoomInstance) -> Self {
        Self {
            room,
            next_seq: 1,
            outbox: Vec::new(),
        }
    }

    pub fn from_world(world: WorldSpec, seed: u64, tick_dt_s: f64) -> Self {
        Self::new(RoomInstance::new(Arc::new(world), seed, tick_dt_s))
    }

    pub fn room(&self) -> &RoomInstance {
        &self.room
    }

    pub fn clock_s(&self) -> f64 {
        self.room.clock_s()
    }

    pub fn snapshot(&self) -> EnvironmentSnapshot {
        let world = self.room.world();
        EnvironmentSnapshot {
            room: world.room_metadata.clone(),
            nav_points: world
                .nav_points
                .iter()
                .map(|p| NavPointInfo {
                    id: p.id.clone(),
                    name: p.name.clone(),
                    x: p.position.x,
                    y: p.position.y,
                    description: p.description.clone(),
                })
                .collect(),
            users: self
                .room
                .avatars()
                .map(|a| UserInfo {
                    id: a.id.clone(),
                    kind: a.kind,
                    x: a.position.x,
                    y: a.position.y,
                })
                .collect(),
            clock_s: self.room.clock_s(),
        }
    }

    /// Applies one command and returns the response payload.
    pub fn execute(&mut self, cmd: &Command) -> Result<Value, RemoteError> {
        let ok = json!({ "ok": true });
        let result = match cmd {
            Command::Hello { v } => {
                if *v != PROTOCOL_VERSION {
                    return Err(RemoteError::version(*v));
                }
                Ok(json!({ "v": PROTOCOL_VERSION, "world": self.room.world().name }))
            }
            Command::GetEnvironment {} => {
                Ok(serde_json::to_value(self.snapshot()).expect("snapshot serializes"))
            }
            Command::SetDestination { avatar_id, target } => self
                .room
                .set_destination(avatar_id, target)
                .map(|s| serde_json::to_value(s).expect("status serializes")),
            Command::GetPathStatus { avatar_id } => self
                .room
                .path_status(avatar_id)
                .map(|s| serde_json::to_value(s).expect("status serializes")),
            Command::SetPosition { avatar_id, x, y } => self
                .room
                .set_position(avatar_id, Position::new(*x, *y))
                .map(|_| ok),
            Command::SetHeading { avatar_id, rad } => {
                self.room.set_heading(avatar_id, *rad).map(|_| ok)
            }
            Command::SendChat { from, text } => self.room.post_chat(from, text).map(|_| ok),
            Command::PlayEmote { from, emote } => self.room.play_emote(from, emote).map(|_| ok),
            Command::SetStatusText { avatar_id, text } => {
                self.room.set_status_text(avatar_id, text).map(|_| ok)
            }
            Command::Join { avatar } => {
                let spawn = self.room.world().spawn;
                let position = Position::new(avatar.x.unwrap_or(spawn.x), avatar.y.unwrap_or(spawn.y));
                self.room
                    .join(Avatar::new(avatar.id.clone(), avatar.kind, position))
                    .map(|_| ok)
            }
            Command::Leave { avatar_id } => self.room.leave(avatar_id).map(|_| ok),
            Command::Subscribe { topics } => Ok(json!({ "topics": topics })),
        };
        self.collect();
        result.map_err(RemoteError::from)
    }

    /// Advances the room by one tick.
    pub fn advance(&mut self) {
        let events = self.room.advance_tick();
        self.push(events);
    }

    /// Sequenced events produced since the last drain.
    pub fn drain_events(&mut self) -> Vec<EventFrame> {
        std::mem::take(&mut self.outbox)
    }

    fn collect(&mut self) {
        let events = self.room.drain_events();
        self.push(events);
    }

    fn push(&mut self, events: Vec<WorldEvent>) {
        for e in events {
            let event = match e.kind {
                WorldEventKind::UserEntered { avatar_id, avatar_kind } => Event::UserEntered {
                    avatar_id,
                    kind: avatar_kind,
                },
                WorldEventKind::UserExited { avatar_id, avatar_kind } => Event::UserExited {
                    avatar_id,
                    kind: avatar_kind,
                },
                WorldEventKind::ChatPosted { from, text } => Event::ChatReceived { from, text },
                WorldEventKind::DestinationReached { avatar_id } => {
                    Event::DestinationReached { avatar_id }
                }
                WorldEventKind::PathBlocked { avatar_id } => Event::PathBlocked { avatar_id },
                WorldEventKind::EmotePlayed { from, emote } => Event::EmotePlayed { from, emote },
                WorldEventKind::Tick { avatars } => Event::TickUpdate { avatars },
            };
            self.outbox.push(EventFrame {
                seq: self.next_seq,
                t_s: e.t_s,
                event,
            });
            self.next_seq += 1;
        }
    }
}
