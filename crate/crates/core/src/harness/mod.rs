//! Bot-driven replications of the study conditions: single sessions,
//! batches, and scripted dialog replay.

mod batch;
mod bot;
mod config;
mod log;
mod replay;
mod session;

use std::path::Path as FsPath;

use thiserror::Error;

pub use batch::{
    log_file_name, run_batch, sha256_hex, BatchMatrix, Manifest, ManifestEntry, RunStatus,
    DEMO_MATRIX, MANIFEST_FILE,
};
pub use bot::{lognormal_from_moments, Bot, ACK_PHRASES, REQUEST_TEMPLATES};
pub use config::{
    load_world_source, BotPersona, Condition, ExitPolicy, ExperienceTag, SessionConfig,
    DEFAULT_DURATION_CAP_S, DEFAULT_SAMPLE_PERIOD_S,
};
pub use log::{ChatLine, MalformedLog, NavRequest, SessionHeader, SessionLog, TrajectorySample};
pub use replay::{
    bundled_fixture, check_kinds, interaction_kinds, replay_transcript, run_fixture,
    DialogFixture, FixtureBackend, FixtureTurn, TOUR_FIXTURE,
};
pub use session::{run_session, run_session_in, Visitor, VisitorAction, VisitorView, USER_ID};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot load world {0}")]
    WorldLoad(String),
    #[error("agent failed to start: {0}")]
    AgentSpawn(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad fixture: {0}")]
    Fixture(String),
    #[error("fixture mismatch at event {index}: expected {expected}, got {actual}")]
    FixtureMismatch { index: usize, expected: String, actual: String },
    #[error(transparent)]
    Malformed(#[from] MalformedLog),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: &FsPath, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}
