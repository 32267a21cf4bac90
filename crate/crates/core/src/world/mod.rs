//! Deterministic 2D world: walkability grid, navigation points and avatars
//! moving under a fixed-timestep clock.

mod path;
mod room;
mod spec;

use thiserror::Error;

pub use path::{find_cells, find_path, Path, NEIGHBORS};
pub use room::{
    Avatar, AvatarKind, AvatarSample, PathStatus, RoomInstance, Target, WorldEvent,
    WorldEventKind, DEFAULT_SPEED_MPS, DEFAULT_TICK_DT_S,
};
pub use spec::{load_world, CellIndex, NavPoint, Position, WorldSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("malformed world document: {0}")]
    Parse(String),
    #[error("invalid world at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("no path to destination")]
    NoPath,
    #[error("position is not walkable: {0}")]
    Unwalkable(String),
    #[error("unknown avatar {0:?}")]
    UnknownAvatar(String),
    #[error("unknown nav point {0:?}")]
    UnknownNavPoint(String),
    #[error("avatar id {0:?} already in room")]
    DuplicateAvatarId(String),
}

/// Bundled worlds, addressable by short name (`museum`, `ruina`).
pub mod bundled {
    pub const MUSEUM: &str = include_str!("../../assets/worlds/museum.world.json");
    pub const RUINA: &str = include_str!("../../assets/worlds/ruina.world.json");

    pub fn by_name(name: &str) -> Option<&'static str> {
        let stem = name.trim_end_matches(".world.json");
        let stem = stem.rsplit('/').next().unwrap_or(stem);
        match stem {
            "museum" => Some(MUSEUM),
            "ruina" => Some(RUINA),
            _ => None,
        }
    }
}
