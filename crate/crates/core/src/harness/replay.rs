//! Golden end-to-end replay of a scripted dialog.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::config::{load_world_source, Condition, DEFAULT_DURATION_CAP_S, DEFAULT_SAMPLE_PERIOD_S};
use super::log::{SessionHeader, SessionLog};
use super::session::{run_lockstep, LockstepParams, Visitor, VisitorAction, VisitorView, USER_ID};
use super::HarnessError;
use crate::agent::{
    AgentConfig, Decision, DecisionBackend, RuleBackend, ScriptBackend, FILLER_TEXT,
    STATUS_PLEASE_SPEAK,
};
use crate::protocol::{Event, EventFrame};
use crate::world::{AvatarKind, PathStatus, Target, DEFAULT_TICK_DT_S};

pub const TOUR_FIXTURE: &str = include_str!("../../assets/fixtures/tour.dialog.json");

pub fn bundled_fixture(name: &str) -> Option<&'static str> {
    match name.rsplit('/').next().unwrap_or(name) {
        "tour.dialog.json" | "tour" => Some(TOUR_FIXTURE),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureBackend {
    #[default]
    Script,
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTurn {
    pub text: String,
    /// Seconds the user waits after the agent is ready to listen.
    #[serde(default = "default_gap")]
    pub gap_s: f64,
    /// Nav point this utterance asks for; the user follows once answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<String>,
}

fn default_gap() -> f64 {
    2.0
}

fn default_linger() -> f64 {
    3.0
}

fn default_think() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogFixture {
    #[serde(default)]
    pub description: String,
    pub world: String,
    #[serde(default)]
    pub backend: FixtureBackend,
    #[serde(default = "default_think")]
    pub think_s: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub turns: Vec<FixtureTurn>,
    /// Agent replies for the script backend, one per user turn.
    #[serde(default)]
    pub replies: Vec<Decision>,
    /// Idle time after the last turn before the user leaves.
    #[serde(default = "default_linger")]
    pub linger_s: f64,
    /// Expected interaction kinds; omitted means "do not check".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<String>>,
}

impl DialogFixture {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Fixture(e.to_string()))
    }
}

/// User that speaks the fixture's lines whenever the agent is ready.
struct ScriptedUser {
    turns: Vec<FixtureTurn>,
    next: usize,
    linger_s: f64,
    ready_since: Option<f64>,
    awaiting: Option<String>,
    follow: Option<String>,
}

impl Visitor for ScriptedUser {
    fn id(&self) -> &str {
        USER_ID
    }

    fn observe(&mut self, frame: &EventFrame) {
        match &frame.event {
            Event::TickUpdate { avatars } => {
                let ready = avatars
                    .iter()
                    .any(|a| a.kind == AvatarKind::Agent && a.status.as_deref() == Some(STATUS_PLEASE_SPEAK));
                match (ready, self.ready_since) {
                    (true, None) => self.ready_since = Some(frame.t_s),
                    (false, _) => self.ready_since = None,
                    _ => {}
                }
            }
            Event::ChatReceived { from, text } if from != USER_ID && text != FILLER_TEXT => {
                self.follow = self.awaiting.take();
            }
            _ => {}
        }
    }

    fn act(&mut self, view: &VisitorView) -> Vec<VisitorAction> {
        if let Some(id) = self.follow.take() {
            return vec![VisitorAction::MoveTo(Target::NavPoint(id))];
        }
        if self.turns.is_empty() {
            return vec![VisitorAction::Leave];
        }
        let Some(since) = self.ready_since else { return Vec::new() };
        let idle = view.now_s - since;
        match self.turns.get(self.next) {
            Some(turn) if idle >= turn.gap_s - 1e-9 => {
                let turn = turn.clone();
                self.next += 1;
                self.ready_since = None;
                self.awaiting = turn.request.clone();
                vec![VisitorAction::Say { text: turn.text, request: turn.request }]
            }
            None if idle >= self.linger_s - 1e-9 => vec![VisitorAction::Leave],
            _ => Vec::new(),
        }
    }

    fn on_destination(&mut self, _status: PathStatus, _now_s: f64) {}
}

/// Runs `fixture` as an on-demand session without checking expectations.
pub fn run_fixture(fixture: &DialogFixture, base: Option<&FsPath>) -> Result<SessionLog, HarnessError> {
    let world = load_world_source(&fixture.world, base)?;
    let backend: Box<dyn DecisionBackend> = match fixture.backend {
        FixtureBackend::Script => Box::new(ScriptBackend::new(fixture.replies.clone())),
        FixtureBackend::Rule => Box::new(RuleBackend::new(fixture.think_s)),
    };
    let agent = AgentConfig::default();
    let sample_every = (DEFAULT_SAMPLE_PERIOD_S / DEFAULT_TICK_DT_S).round() as u64;
    let header = SessionHeader {
        world: world.name.clone(),
        world_width_m: world.width_m,
        world_height_m: world.height_m,
        condition: Condition::OnDemand,
        persona: format!("script/{:?}", fixture.backend).to_lowercase(),
        seed: fixture.seed,
        user_id: USER_ID.to_string(),
        agent_id: Some(agent.agent_id.clone()),
        sample_period_s: sample_every as f64 * DEFAULT_TICK_DT_S,
        tick_dt_s: DEFAULT_TICK_DT_S,
        duration_cap_s: DEFAULT_DURATION_CAP_S,
        config: serde_json::to_value(fixture).expect("fixture serializes"),
    };
    let params = LockstepParams {
        seed: fixture.seed,
        tick_dt_s: DEFAULT_TICK_DT_S,
        sample_every,
        duration_cap_s: DEFAULT_DURATION_CAP_S,
        time_scale: None,
        agent,
    };
    let mut user = ScriptedUser {
        turns: fixture.turns.clone(),
        next: 0,
        linger_s: fixture.linger_s,
        ready_since: None,
        awaiting: None,
        follow: None,
    };
    let rec = run_lockstep(world, &params, Some(backend), &mut user)?;
    Ok(SessionLog {
        header,
        trajectory: rec.trajectory,
        chat: rec.chat,
        agent_intervals: rec.agent_intervals,
        nav_requests: rec.nav_requests,
        entry_t_s: rec.entry_t_s,
        exit_t_s: rec.exit_t_s,
    })
}

/// The session as a sequence of interaction kinds:
/// `request`, `chat`, `filler`, `reply`, `navigate`, `arrived`, `blocked`.
pub fn interaction_kinds(log: &SessionLog) -> Vec<String> {
    let user = log.header.user_id.as_str();
    let mut events: Vec<(f64, u8, &'static str)> = Vec::new();
    let mut requests = log.nav_requests.iter().peekable();
    for c in &log.chat {
        if c.from == user {
            let is_request = requests.peek().is_some_and(|r| (r.t_s - c.t_s).abs() < 1e-9);
            if is_request {
                requests.next();
            }
            events.push((c.t_s, 1, if is_request { "request" } else { "chat" }));
        } else if c.text == FILLER_TEXT {
            events.push((c.t_s, 2, "filler"));
        } else {
            events.push((c.t_s, 3, "reply"));
        }
    }
    for iv in log.agent_intervals.iter().filter(|i| i.state == "PerformingAction") {
        events.push((iv.t0_s, 4, "navigate"));
        match iv.reached {
            Some(true) => events.push((iv.t1_s, 0, "arrived")),
            Some(false) if iv.t1_s < log.exit_t_s => events.push((iv.t1_s, 0, "blocked")),
            _ => {}
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    events.into_iter().map(|(_, _, k)| k.to_string()).collect()
}

/// First divergence between the expected and observed kind sequences.
pub fn check_kinds(expected: &[String], actual: &[String]) -> Result<(), HarnessError> {
    let n = expected.len().max(actual.len());
    for index in 0..n {
        let (e, a) = (expected.get(index), actual.get(index));
        if e != a {
            let show = |x: Option<&String>| x.cloned().unwrap_or_else(|| "<end>".to_string());
            return Err(HarnessError::FixtureMismatch { index, expected: show(e), actual: show(a) });
        }
    }
    Ok(())
}

/// Runs a fixture file (or a bundled fixture name) and verifies its
/// expected interaction shape.
pub fn replay_transcript(fixture: &FsPath) -> Result<SessionLog, HarnessError> {
    let (text, base) = if fixture.is_file() {
        let text = std::fs::read_to_string(fixture).map_err(|e| HarnessError::io(fixture, e))?;
        (text, fixture.parent().map(FsPath::to_path_buf))
    } else {
        let name = fixture.to_string_lossy();
        let text = bundled_fixture(&name)
            .ok_or_else(|| HarnessError::Fixture(format!("{name}: no such file or bundled fixture")))?;
        (text.to_string(), None)
    };
    let fx = DialogFixture::parse(&text)?;
    let log = run_fixture(&fx, base.as_deref())?;
    if let Some(expected) = &fx.expected {
        check_kinds(expected, &interaction_kinds(&log))?;
    }
    Ok(log)
}
