//! Navigation agent for simulated UGC worlds.
//!
//! * [`world`]: walkability grid, nav points, avatars and the tick loop.
//! * [`protocol`]: the agent driver wire format and the world-side host.
//! * [`agent`]: six-state agent loop, observation context and decision backends.
//! * [`harness`]: scripted-bot sessions, batches and transcript replay.
//! * [`analytics`]: dwell time, free exploration time, heatmaps and spatial entropy.

pub mod agent;
pub mod analytics;
pub mod harness;
pub mod protocol;
pub mod world;
