use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::path::{find_path, Path};
use super::spec::{Position, WorldSpec};
use super::WorldError;

pub const DEFAULT_SPEED_MPS: f64 = 2.0;
pub const DEFAULT_TICK_DT_S: f64 = 0.1;

/// Progress within this distance of the end counts as arrival.
const ARRIVAL_EPS_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvatarKind {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Avatar {
    pub id: String,
    pub kind: AvatarKind,
    pub position: Position,
    pub heading: f64,
    pub speed_mps: f64,
    pub path: Option<Path>,
    pub display_status: Option<String>,
}

impl Avatar {
    pub fn new(id: impl Into<String>, kind: AvatarKind, position: Position) -> Self {
        Self {
            id: id.into(),
            kind,
            position,
            heading: 0.0,
            speed_mps: DEFAULT_SPEED_MPS,
            path: None,
            display_status: None,
        }
    }
}

/// Where to send an avatar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    NavPoint(String),
    Position(Position),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStatus {
    pub feasible: bool,
    pub remaining_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarSample {
    pub id: String,
    pub kind: AvatarKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WorldEventKind {
    UserEntered { avatar_id: String, avatar_kind: AvatarKind },
    UserExited { avatar_id: String, avatar_kind: AvatarKind },
    ChatPosted { from: String, text: String },
    DestinationReached { avatar_id: String },
    PathBlocked { avatar_id: String },
    EmotePlayed { from: String, emote: String },
    Tick { avatars: Vec<AvatarSample> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub kind: WorldEventKind,
}

/// Live room state. Mutated by a single writer; the clock only moves in
/// whole ticks so identical inputs replay identically.
#[derive(Debug, Clone)]
pub struct RoomInstance {
    world: Arc<WorldSpec>,
    ticks: u64,
    tick_dt_s: f64,
    avatars: BTreeMap<String, Avatar>,
    seed: u64,
    pending_events: VecDeque<WorldEvent>,
}

impl RoomInstance {
    pub fn new(world: Arc<WorldSpec>, seed: u64, tick_dt_s: f64) -> Self {
        assert!(tick_dt_s > 0.0, "tick_dt_s must be positive");
        Self {
            world,
            ticks: 0,
            tick_dt_s,
            avatars: BTreeMap::new(),
            seed,
            pending_events: VecDeque::new(),
        }
    }

    pub fn world(&self) -> &Arc<WorldSpec> {
        &self.world
    }

    pub fn clock_s(&self) -> f64 {
        self.ticks as f64 * self.tick_dt_s
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn tick_dt_s(&self) -> f64 {
        self.tick_dt_s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn avatars(&self) -> impl Iterator<Item = &Avatar> {
        self.avatars.values()
    }

    pub fn avatar(&self, id: &str) -> Result<&Avatar, WorldError> {
        self.avatars.get(id).ok_or_else(|| WorldError::UnknownAvatar(id.to_string()))
    }

    fn avatar_mut(&mut self, id: &str) -> Result<&mut Avatar, WorldError> {
        self.avatars.get_mut(id).ok_or_else(|| WorldError::UnknownAvatar(id.to_string()))
    }

    fn emit(&mut self, kind: WorldEventKind) {
        let t_s = self.clock_s();
        self.pending_events.push_back(WorldEvent { t_s, kind });
    }

    /// Takes every event emitted since the last drain, in emission order.
    pub fn drain_events(&mut self) -> Vec<WorldEvent> {
        self.pending_events.drain(..).collect()
    }

    fn check_walkable(&self, p: Position) -> Result<(), WorldError> {
        let cell = self.world.pos_to_cell(p)?;
        if self.world.is_walkable(cell) {
            Ok(())
        } else {
            Err(WorldError::Unwalkable(format!("({}, {})", p.x, p.y)))
        }
    }

    pub fn join(&mut self, avatar: Avatar) -> Result<(), WorldError> {
        if self.avatars.contains_key(&avatar.id) {
            return Err(WorldError::DuplicateAvatarId(avatar.id));
        }
        if avatar.id.is_empty() {
            return Err(WorldError::UnknownAvatar(String::new()));
        }
        self.check_walkable(avatar.position)?;
        let (avatar_id, avatar_kind) = (avatar.id.clone(), avatar.kind);
        self.avatars.insert(avatar.id.clone(), Avatar { path: None, ..avatar });
        self.emit(WorldEventKind::UserEntered { avatar_id, avatar_kind });
        Ok(())
    }

    pub fn leave(&mut self, avatar_id: &str) -> Result<(), WorldError> {
        let avatar = self
            .avatars
            .remove(avatar_id)
            .ok_or_else(|| WorldError::UnknownAvatar(avatar_id.to_string()))?;
        self.emit(WorldEventKind::UserExited {
            avatar_id: avatar.id,
            avatar_kind: avatar.kind,
        });
        Ok(())
    }

    pub fn post_chat(&mut self, avatar_id: &str, text: &str) -> Result<(), WorldError> {
        self.avatar(avatar_id)?;
        self.emit(WorldEventKind::ChatPosted {
            from: avatar_id.to_string(),
            text: text.to_string(),
        });
        Ok(())
    }

    pub fn play_emote(&mut self, avatar_id: &str, emote: &str) -> Result<(), WorldError> {
        self.avatar(avatar_id)?;
        self.emit(WorldEventKind::EmotePlayed {
            from: avatar_id.to_string(),
            emote: emote.to_string(),
        });
        Ok(())
    }

    pub fn set_status_text(&mut self, avatar_id: &str, text: &str) -> Result<(), WorldError> {
        let avatar = self.avatar_mut(avatar_id)?;
        avatar.display_status = (!text.is_empty()).then(|| text.to_string());
        Ok(())
    }

    pub fn set_heading(&mut self, avatar_id: &str, heading: f64) -> Result<(), WorldError> {
        self.avatar_mut(avatar_id)?.heading = heading;
        Ok(())
    }

    /// Teleports an avatar. An active path is dropped and reported as blocked.
    pub fn set_position(&mut self, avatar_id: &str, position: Position) -> Result<(), WorldError> {
        self.avatar(avatar_id)?;
        self.check_walkable(position)?;
        let avatar = self.avatar_mut(avatar_id)?;
        avatar.position = position;
        if avatar.path.take().is_some() {
            self.emit(WorldEventKind::PathBlocked {
                avatar_id: avatar_id.to_string(),
            });
        }
        Ok(())
    }

    pub fn resolve_target(&self, target: &Target) -> Result<Position, WorldError> {
        match target {
            Target::Position(p) => Ok(*p),
            Target::NavPoint(id) => self
                .world
                .nav_point(id)
                .map(|p| p.position)
                .ok_or_else(|| WorldError::UnknownNavPoint(id.clone())),
        }
    }

    /// Plans and installs a new path. An infeasible target leaves the
    /// current path untouched.
    pub fn set_destination(
        &mut self,
        avatar_id: &str,
        target: &Target,
    ) -> Result<PathStatus, WorldError> {
        let from = self.avatar(avatar_id)?.position;
        let to = self.resolve_target(target)?;
        match find_path(&self.world, from, to) {
            Ok(path) => {
                let remaining = path.remaining_m();
                self.avatar_mut(avatar_id)?.path = Some(path);
                Ok(PathStatus {
                    feasible: true,
                    remaining_m: Some(remaining),
                })
            }
            Err(WorldError::NoPath | WorldError::OutOfBounds(_) | WorldError::Unwalkable(_)) => {
                Ok(PathStatus {
                    feasible: false,
                    remaining_m: None,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Status of the avatar's current path; an idle avatar reports zero remaining.
    pub fn path_status(&self, avatar_id: &str) -> Result<PathStatus, WorldError> {
        let avatar = self.avatar(avatar_id)?;
        Ok(PathStatus {
            feasible: true,
            remaining_m: Some(avatar.path.as_ref().map_or(0.0, Path::remaining_m)),
        })
    }

    pub fn samples(&self) -> Vec<AvatarSample> {
        self.avatars
            .values()
            .map(|a| AvatarSample {
                id: a.id.clone(),
                kind: a.kind,
                x: a.position.x,
                y: a.position.y,
                heading: a.heading,
                status: a.display_status.clone(),
            })
            .collect()
    }

    /// Advances the clock by one tick, moves every avatar with a path and
    /// returns the events emitted during this call (including any that were
    /// still pending).
    pub fn advance_tick(&mut self) -> Vec<WorldEvent> {
        self.ticks += 1;
        let dt = self.tick_dt_s;
        let mut arrived = Vec::new();
        for avatar in self.avatars.values_mut() {
            let Some(path) = avatar.path.as_mut() else { continue };
            path.progress_m = (path.progress_m + avatar.speed_mps * dt).min(path.total_length_m);
            let (pos, heading) = path.point_at(path.progress_m);
            avatar.position = pos;
            if let Some(h) = heading {
                avatar.heading = h;
            }
            if path.total_length_m - path.progress_m <= ARRIVAL_EPS_M {
                avatar.position = path.destination();
                avatar.path = None;
                arrived.push(avatar.id.clone());
            }
        }
        for avatar_id in arrived {
            self.emit(WorldEventKind::DestinationReached { avatar_id });
        }
        let avatars = self.samples();
        self.emit(WorldEventKind::Tick { avatars });
        self.drain_events()
    }
}
