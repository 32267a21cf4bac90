//! Event loop glue between the driver and the pure state machine.
//!
//! [`AgentRuntime`] is transport-agnostic: it consumes driver events, emits
//! [`AgentRequest`]s for the host to carry out, and receives backend
//! decisions and destination feasibility back. Time is always the room
//! clock taken from the events, never the wall clock.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::backend::{AgentAction, Decision};
use super::log::{AgentLogRecord, StateInterval};
use super::machine::{step, AgentInput, AgentState, Effect, Machine, PlaybackTiming};
use super::observation::{AgentPoint, HistoryTurn, ObservationContext, DEFAULT_HISTORY_WINDOW};
use crate::protocol::{Command, EnvironmentSnapshot, Event, EventFrame, UserInfo};
use crate::world::{AvatarKind, PathStatus, Target};

pub const FILLER_TEXT: &str = "Thinking...";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub agent_id: String,
    pub chars_per_s: f64,
    pub min_playback_s: f64,
    pub filler_after_s: f64,
    pub think_timeout_s: f64,
    pub history_window: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            agent_id: "pixie".to_string(),
            chars_per_s: 15.0,
            min_playback_s: 1.0,
            filler_after_s: 1.0,
            think_timeout_s: 30.0,
            history_window: DEFAULT_HISTORY_WINDOW,
        }
    }
}

impl AgentConfig {
    pub fn timing(&self) -> PlaybackTiming {
        PlaybackTiming {
            chars_per_s: self.chars_per_s,
            min_playback_s: self.min_playback_s,
        }
    }
}

/// Work the runtime needs its host to perform.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentRequest {
    /// Send to the driver. A `SetDestination` result must be passed back
    /// through [`AgentRuntime::on_destination_status`].
    Command(Command),
    /// Run the decision backend and hand the result to
    /// [`AgentRuntime::deliver_decision`].
    Decide {
        turn: u64,
        from: String,
        utterance: String,
        context: ObservationContext,
    },
}

#[derive(Debug, Clone)]
struct Pending {
    ready_at_s: f64,
    decision: Decision,
}

#[derive(Debug)]
pub struct AgentRuntime {
    config: AgentConfig,
    timing: PlaybackTiming,
    machine: Machine,
    snapshot: EnvironmentSnapshot,
    avatars: BTreeMap<String, UserInfo>,
    history: VecDeque<HistoryTurn>,
    pending: Option<Pending>,
    filler_sent_for: Option<u64>,
    log: Vec<AgentLogRecord>,
    intervals: Vec<StateInterval>,
    current: (String, f64, Option<String>),
    now_s: f64,
}

impl AgentRuntime {
    /// Creates a runtime from an initial snapshot taken after the agent's
    /// avatar joined. Users already present count as having entered.
    pub fn new(config: AgentConfig, snapshot: EnvironmentSnapshot) -> (Self, Vec<AgentRequest>) {
        let now_s = snapshot.clock_s;
        let avatars = snapshot.users.iter().map(|u| (u.id.clone(), u.clone())).collect();
        let mut rt = Self {
            timing: config.timing(),
            config,
            machine: Machine::default(),
            snapshot,
            avatars,
            history: VecDeque::new(),
            pending: None,
            filler_sent_for: None,
            log: Vec::new(),
            intervals: Vec::new(),
            current: ("Suspend".to_string(), now_s, None),
            now_s,
        };
        let present: Vec<String> = rt.users().map(|u| u.id.clone()).collect();
        let mut out = Vec::new();
        for user_id in present {
            out.extend(rt.feed(AgentInput::UserEntered { user_id }, now_s));
        }
        (rt, out)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn state(&self) -> &AgentState {
        &self.machine.state
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn log(&self) -> &[AgentLogRecord] {
        &self.log
    }

    fn users(&self) -> impl Iterator<Item = &UserInfo> {
        self.avatars.values().filter(|u| u.kind == AvatarKind::User)
    }

    /// Closed state intervals plus the open one, cut at `end_s`.
    pub fn intervals(&self, end_s: f64) -> Vec<StateInterval> {
        let mut all = self.intervals.clone();
        let (state, t0_s, target) = &self.current;
        if end_s > *t0_s {
            all.push(StateInterval {
                t0_s: *t0_s,
                t1_s: end_s,
                state: state.clone(),
                target: target.clone(),
                reached: target.as_ref().map(|_| false),
            });
        }
        all
    }

    pub fn observation(&self) -> ObservationContext {
        let me = self.avatars.get(&self.config.agent_id);
        ObservationContext {
            room: self.snapshot.room.clone(),
            clock_s: self.now_s,
            agent: AgentPoint {
                x: me.map_or(0.0, |a| a.x),
                y: me.map_or(0.0, |a| a.y),
            },
            users: self.users().cloned().collect(),
            nav_points: self.snapshot.nav_points.clone(),
            history: self.history.iter().cloned().collect(),
        }
    }

    fn remember(&mut self, t_s: f64, from: &str, text: &str) {
        self.history.push_back(HistoryTurn {
            t_s,
            from: from.to_string(),
            text: text.to_string(),
        });
        while self.history.len() > self.config.history_window {
            self.history.pop_front();
        }
    }

    pub fn handle_event(&mut self, frame: &EventFrame) -> Vec<AgentRequest> {
        let now = frame.t_s;
        self.now_s = self.now_s.max(now);
        let me = self.config.agent_id.clone();
        let mut out = Vec::new();
        match &frame.event {
            Event::UserEntered { avatar_id, kind } => {
                self.avatars.entry(avatar_id.clone()).or_insert(UserInfo {
                    id: avatar_id.clone(),
                    kind: *kind,
                    x: 0.0,
                    y: 0.0,
                });
                if *kind == AvatarKind::User {
                    out.extend(self.feed(AgentInput::UserEntered { user_id: avatar_id.clone() }, now));
                }
            }
            Event::UserExited { avatar_id, kind } => {
                self.avatars.remove(avatar_id);
                if *kind == AvatarKind::User {
                    let remaining_users = self.users().count();
                    out.extend(self.feed(
                        AgentInput::UserExited { user_id: avatar_id.clone(), remaining_users },
                        now,
                    ));
                }
            }
            Event::ChatReceived { from, text } => {
                self.remember(now, from, text);
                let is_user = self.avatars.get(from).is_some_and(|a| a.kind == AvatarKind::User);
                if *from != me && is_user {
                    out.extend(self.feed(AgentInput::UserMessageStart { from: from.clone() }, now));
                    out.extend(self.feed(
                        AgentInput::UserMessageComplete { from: from.clone(), text: text.clone() },
                        now,
                    ));
                }
            }
            Event::DestinationReached { avatar_id } if *avatar_id == me => {
                if matches!(self.machine.state, AgentState::PerformingAction { .. }) {
                    out.extend(self.feed(AgentInput::ActionFinished { reached: true }, now));
                }
            }
            Event::PathBlocked { avatar_id } if *avatar_id == me => {
                if matches!(self.machine.state, AgentState::PerformingAction { .. }) {
                    out.extend(self.feed(AgentInput::ActionFinished { reached: false }, now));
                }
            }
            Event::TickUpdate { avatars } => {
                for a in avatars {
                    self.avatars.insert(
                        a.id.clone(),
                        UserInfo { id: a.id.clone(), kind: a.kind, x: a.x, y: a.y },
                    );
                }
            }
            _ => {}
        }
        out.extend(self.poll(now));
        out
    }

    /// Fires timers that are due at `now_s`.
    pub fn poll(&mut self, now_s: f64) -> Vec<AgentRequest> {
        self.now_s = self.now_s.max(now_s);
        let mut out = Vec::new();
        loop {
            let input = match &self.machine.state {
                AgentState::Thinking { turn, since_s } => {
                    let (turn, since_s) = (*turn, *since_s);
                    if let Some(p) = self.pending.as_ref().filter(|p| p.ready_at_s <= now_s) {
                        let d = p.decision.clone();
                        self.pending = None;
                        Some(AgentInput::DecisionReady { turn, reply: d.reply, action: d.action })
                    } else if now_s - since_s >= self.config.think_timeout_s {
                        self.pending = None;
                        Some(AgentInput::ThinkTimeout { turn })
                    } else {
                        if now_s - since_s >= self.config.filler_after_s
                            && self.filler_sent_for != Some(turn)
                        {
                            self.filler_sent_for = Some(turn);
                            out.push(AgentRequest::Command(Command::SendChat {
                                from: self.config.agent_id.clone(),
                                text: FILLER_TEXT.to_string(),
                            }));
                        }
                        None
                    }
                }
                AgentState::Playback { finish_s, .. } if *finish_s <= now_s => {
                    Some(AgentInput::PlaybackFinished)
                }
                _ => None,
            };
            match input {
                Some(i) => out.extend(self.feed(i, now_s)),
                None => return out,
            }
        }
    }

    /// Accepts a backend result for `turn`. It takes effect once the
    /// simulated thinking delay has elapsed.
    pub fn deliver_decision(&mut self, turn: u64, mut decision: Decision, now_s: f64) -> Vec<AgentRequest> {
        let AgentState::Thinking { turn: current, since_s } = self.machine.state else {
            return Vec::new();
        };
        if current != turn {
            return Vec::new();
        }
        // A Navigate must name a point the agent actually knows about.
        if let AgentAction::Navigate { nav_point_id } = &decision.action {
            if self.snapshot.nav_point(nav_point_id).is_none() {
                decision.action = AgentAction::None;
            }
        }
        self.pending = Some(Pending {
            ready_at_s: (since_s + decision.delay_s.max(0.0)).max(now_s),
            decision,
        });
        self.poll(now_s)
    }

    /// Feasibility of the destination requested by the last `SetDestination`.
    pub fn on_destination_status(&mut self, status: PathStatus, now_s: f64) -> Vec<AgentRequest> {
        if !status.feasible && matches!(self.machine.state, AgentState::PerformingAction { .. }) {
            let mut out = self.feed(AgentInput::ActionFinished { reached: false }, now_s);
            out.extend(self.poll(now_s));
            return out;
        }
        Vec::new()
    }

    fn feed(&mut self, input: AgentInput, now_s: f64) -> Vec<AgentRequest> {
        let (next, effects) = step(&self.machine, &input, now_s, &self.timing);
        let finished_action = match &input {
            AgentInput::ActionFinished { reached } => Some(*reached),
            _ => None,
        };
        self.machine = next;
        self.track_interval(now_s, finished_action);
        self.log.push(AgentLogRecord {
            t_s: now_s,
            state: self.machine.state.name().to_string(),
            input: Some(input),
            effect: None,
        });
        let mut out = Vec::new();
        for effect in effects {
            self.log.push(AgentLogRecord {
                t_s: now_s,
                state: self.machine.state.name().to_string(),
                input: None,
                effect: Some(effect.clone()),
            });
            let me = self.config.agent_id.clone();
            out.push(match effect {
                Effect::SetStatusText { text } => {
                    AgentRequest::Command(Command::SetStatusText { avatar_id: me, text })
                }
                Effect::InvokeBackend { turn, from, text } => {
                    self.pending = None;
                    AgentRequest::Decide {
                        turn,
                        from,
                        utterance: text,
                        context: self.observation(),
                    }
                }
                Effect::Speak { text, .. } => {
                    AgentRequest::Command(Command::SendChat { from: me, text })
                }
                Effect::SetDestination { nav_point_id } => AgentRequest::Command(Command::SetDestination {
                    avatar_id: me,
                    target: Target::NavPoint(nav_point_id),
                }),
                Effect::PlayEmote { name } => {
                    AgentRequest::Command(Command::PlayEmote { from: me, emote: name })
                }
            });
        }
        out
    }

    fn track_interval(&mut self, now_s: f64, finished_action: Option<bool>) {
        let name = self.machine.state.name().to_string();
        let target = match &self.machine.state {
            AgentState::PerformingAction { target } => Some(target.clone()),
            _ => None,
        };
        let (cur_name, t0_s, cur_target) = &self.current;
        if *cur_name == name && *cur_target == target {
            return;
        }
        if now_s > *t0_s {
            self.intervals.push(StateInterval {
                t0_s: *t0_s,
                t1_s: now_s,
                state: cur_name.clone(),
                target: cur_target.clone(),
                reached: cur_target.as_ref().map(|_| finished_action.unwrap_or(false)),
            });
        }
        self.current = (name, now_s, target);
    }
}
