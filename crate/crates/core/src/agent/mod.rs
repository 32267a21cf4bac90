//! The navigation agent: state machine, observation context, decision
//! backends and the transport-agnostic runtime.

pub mod backend;
pub mod log;
pub mod machine;
pub mod observation;
pub mod runtime;

pub use backend::{
    fixed_route_decide, rule_backend_decide, AgentAction, Decision, DecisionBackend,
    FixedRouteBackend, Intent, RouteState, RuleBackend, ScriptBackend,
};
pub use log::{measure_response_time, AgentLogRecord, NoSamples, ResponseTime, StateInterval};
pub use machine::{
    playback_duration, step, AgentInput, AgentState, Effect, Machine, PlaybackTiming,
    STATUS_PLEASE_SPEAK, STATUS_THINKING, THINK_TIMEOUT_REPLY,
};
pub use observation::{HistoryTurn, ObservationContext};
pub use runtime::{AgentConfig, AgentRequest, AgentRuntime, FILLER_TEXT};
