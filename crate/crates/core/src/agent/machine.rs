//! The six-state agent loop as a pure transition function.
//!
//! ```text
//! Suspend --UserEntered--> Waiting --UserMessageStart--> PlayerListening
//!    ^                        ^                               |
//!    | last user exits        |                      UserMessageComplete
//!    |                        |                               v
//!  (any)          ActionFinished / PlaybackFinished       Thinking
//!                             |                               |
//!              PerformingAction <--PlaybackFinished-- Playback <--DecisionReady
//! ```
//!
//! User messages that arrive while the agent is busy are kept in a backlog
//! and replayed, in order, the next time the agent returns to `Waiting`.
//! Timer inputs that do not belong to the current state are ignored.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::backend::AgentAction;

pub const STATUS_PLEASE_SPEAK: &str = "(Please speak)";
pub const STATUS_THINKING: &str = "(Thinking)";
pub const THINK_TIMEOUT_REPLY: &str =
    "Sorry, I lost my train of thought. Could you say that again?";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaybackTiming {
    pub chars_per_s: f64,
    pub min_playback_s: f64,
}

impl Default for PlaybackTiming {
    fn default() -> Self {
        Self {
            chars_per_s: 15.0,
            min_playback_s: 1.0,
        }
    }
}

impl PlaybackTiming {
    /// Seconds the agent spends "speaking" `text`.
    pub fn duration(&self, text: &str) -> f64 {
        let chars = text.chars().count() as f64;
        (chars / self.chars_per_s).max(self.min_playback_s)
    }
}

/// `playback_duration` with the default timing.
pub fn playback_duration(text: &str) -> f64 {
    PlaybackTiming::default().duration(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum AgentState {
    Suspend,
    Waiting,
    PlayerListening {
        from: String,
    },
    Thinking {
        turn: u64,
        since_s: f64,
    },
    Playback {
        text: String,
        finish_s: f64,
        pending: AgentAction,
    },
    PerformingAction {
        target: String,
    },
}

impl AgentState {
    pub fn name(&self) -> &'static str {
        match self {
            AgentState::Suspend => "Suspend",
            AgentState::Waiting => "Waiting",
            AgentState::PlayerListening { .. } => "PlayerListening",
            AgentState::Thinking { .. } => "Thinking",
            AgentState::Playback { .. } => "Playback",
            AgentState::PerformingAction { .. } => "PerformingAction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum AgentInput {
    UserEntered { user_id: String },
    /// `remaining_users` counts users still present after this exit.
    UserExited { user_id: String, remaining_users: usize },
    UserMessageStart { from: String },
    UserMessageComplete { from: String, text: String },
    DecisionReady { turn: u64, reply: String, action: AgentAction },
    PlaybackFinished,
    /// `reached` is false when the destination turned out to be infeasible.
    ActionFinished { reached: bool },
    ThinkTimeout { turn: u64 },
}

impl AgentInput {
    pub fn name(&self) -> &'static str {
        match self {
            AgentInput::UserEntered { .. } => "UserEntered",
            AgentInput::UserExited { .. } => "UserExited",
            AgentInput::UserMessageStart { .. } => "UserMessageStart",
            AgentInput::UserMessageComplete { .. } => "UserMessageComplete",
            AgentInput::DecisionReady { .. } => "DecisionReady",
            AgentInput::PlaybackFinished => "PlaybackFinished",
            AgentInput::ActionFinished { .. } => "ActionFinished",
            AgentInput::ThinkTimeout { .. } => "ThinkTimeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Effect {
    SetStatusText { text: String },
    InvokeBackend { turn: u64, from: String, text: String },
    /// Deliver `text` as chat; playback ends at `finish_s`.
    Speak { text: String, finish_s: f64 },
    SetDestination { nav_point_id: String },
    PlayEmote { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedMessage {
    pub from: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub state: AgentState,
    pub backlog: VecDeque<QueuedMessage>,
    pub next_turn: u64,
}

impl Default for Machine {
    fn default() -> Self {
        Self {
            state: AgentState::Suspend,
            backlog: VecDeque::new(),
            next_turn: 1,
        }
    }
}

fn status(text: &str) -> Effect {
    Effect::SetStatusText {
        text: text.to_string(),
    }
}

/// Pure transition function. Total over every `(state, input)` pair.
pub fn step(
    machine: &Machine,
    input: &AgentInput,
    now_s: f64,
    timing: &PlaybackTiming,
) -> (Machine, Vec<Effect>) {
    let mut next = machine.clone();
    let mut effects = Vec::new();
    apply(&mut next, input, now_s, timing, &mut effects);
    (next, effects)
}

fn apply(
    m: &mut Machine,
    input: &AgentInput,
    now_s: f64,
    timing: &PlaybackTiming,
    effects: &mut Vec<Effect>,
) {
    use AgentInput as I;
    use AgentState as S;

    if let I::UserExited { remaining_users: 0, .. } = input {
        m.state = S::Suspend;
        m.backlog.clear();
        return;
    }

    match (&m.state, input) {
        (S::Suspend, I::UserEntered { .. }) => enter_waiting(m, now_s, timing, effects),

        (S::Waiting, I::UserMessageStart { from }) => {
            m.state = S::PlayerListening { from: from.clone() };
        }
        (S::Waiting, I::UserMessageComplete { from, text }) => {
            m.state = S::PlayerListening { from: from.clone() };
            start_thinking(m, from, text, now_s, effects);
        }
        (S::PlayerListening { .. }, I::UserMessageComplete { from, text }) => {
            start_thinking(m, from, text, now_s, effects);
        }

        (S::Thinking { turn, .. }, I::DecisionReady { turn: t, reply, action }) if turn == t => {
            start_playback(m, reply, action.clone(), now_s, timing, effects);
        }
        (S::Thinking { turn, .. }, I::ThinkTimeout { turn: t }) if turn == t => {
            start_playback(m, THINK_TIMEOUT_REPLY, AgentAction::None, now_s, timing, effects);
        }

        (S::Playback { pending, .. }, I::PlaybackFinished) => match pending.clone() {
            AgentAction::Navigate { nav_point_id } => {
                effects.push(Effect::SetDestination {
                    nav_point_id: nav_point_id.clone(),
                });
                m.state = S::PerformingAction { target: nav_point_id };
            }
            AgentAction::Emote { name } => {
                effects.push(Effect::PlayEmote { name });
                enter_waiting(m, now_s, timing, effects);
            }
            AgentAction::None => enter_waiting(m, now_s, timing, effects),
        },

        (S::PerformingAction { .. }, I::ActionFinished { .. }) => {
            enter_waiting(m, now_s, timing, effects)
        }

        // A finished message that cannot be handled now waits its turn.
        (
            S::Thinking { .. } | S::Playback { .. } | S::PerformingAction { .. },
            I::UserMessageComplete { from, text },
        ) => {
            m.backlog.push_back(QueuedMessage {
                from: from.clone(),
                text: text.clone(),
            });
        }

        // Everything else is stale or irrelevant in the current state.
        _ => {}
    }
}

fn start_thinking(m: &mut Machine, from: &str, text: &str, now_s: f64, effects: &mut Vec<Effect>) {
    let turn = m.next_turn;
    m.next_turn += 1;
    m.state = AgentState::Thinking { turn, since_s: now_s };
    effects.push(status(STATUS_THINKING));
    effects.push(Effect::InvokeBackend {
        turn,
        from: from.to_string(),
        text: text.to_string(),
    });
}

fn start_playback(
    m: &mut Machine,
    reply: &str,
    pending: AgentAction,
    now_s: f64,
    timing: &PlaybackTiming,
    effects: &mut Vec<Effect>,
) {
    let finish_s = now_s + timing.duration(reply);
    m.state = AgentState::Playback {
        text: reply.to_string(),
        finish_s,
        pending,
    };
    effects.push(status(""));
    effects.push(Effect::Speak {
        text: reply.to_string(),
        finish_s,
    });
}

fn enter_waiting(m: &mut Machine, now_s: f64, timing: &PlaybackTiming, effects: &mut Vec<Effect>) {
    m.state = AgentState::Waiting;
    effects.push(status(STATUS_PLEASE_SPEAK));
    if let Some(msg) = m.backlog.pop_front() {
        apply(
            m,
            &AgentInput::UserMessageComplete {
                from: msg.from,
                text: msg.text,
            },
            now_s,
            timing,
            effects,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(m: &Machine, input: AgentInput) -> (Machine, Vec<Effect>) {
        step(m, &input, 10.0, &PlaybackTiming::default())
    }

    fn at(state: AgentState) -> Machine {
        Machine {
            state,
            ..Machine::default()
        }
    }

    #[test]
    fn entry_prompts_user() {
        let (m, fx) = run(&Machine::default(), AgentInput::UserEntered { user_id: "u".into() });
        assert_eq!(m.state, AgentState::Waiting);
        assert_eq!(fx, vec![status(STATUS_PLEASE_SPEAK)]);
    }

    #[test]
    fn speak_then_move() {
        let thinking = at(AgentState::Thinking { turn: 1, since_s: 9.0 });
        let nav = AgentAction::Navigate { nav_point_id: "p2".into() };
        let (m, fx) = run(
            &thinking,
            AgentInput::DecisionReady { turn: 1, reply: "On my way!".into(), action: nav.clone() },
        );
        assert_eq!(
            m.state,
            AgentState::Playback { text: "On my way!".into(), finish_s: 11.0, pending: nav }
        );
        assert!(fx.contains(&Effect::Speak { text: "On my way!".into(), finish_s: 11.0 }));
        assert!(!fx.iter().any(|e| matches!(e, Effect::SetDestination { .. })));

        let (m, fx) = run(&m, AgentInput::PlaybackFinished);
        assert_eq!(m.state, AgentState::PerformingAction { target: "p2".into() });
        assert_eq!(fx, vec![Effect::SetDestination { nav_point_id: "p2".into() }]);
    }

    #[test]
    fn stale_playback_finished_is_ignored() {
        let (m, fx) = run(&at(AgentState::Waiting), AgentInput::PlaybackFinished);
        assert_eq!(m.state, AgentState::Waiting);
        assert!(fx.is_empty());
    }

    #[test]
    fn wrong_turn_decision_is_ignored() {
        let thinking = at(AgentState::Thinking { turn: 2, since_s: 0.0 });
        let (m, fx) = run(
            &thinking,
            AgentInput::DecisionReady { turn: 1, reply: "x".into(), action: AgentAction::None },
        );
        assert_eq!(m, thinking);
        assert!(fx.is_empty());
    }

    #[test]
    fn busy_agent_queues_messages() {
        let playing = at(AgentState::Playback {
            text: "hi".into(),
            finish_s: 11.0,
            pending: AgentAction::None,
        });
        let (m, _) = run(
            &playing,
            AgentInput::UserMessageComplete { from: "u".into(), text: "globe".into() },
        );
        assert_eq!(m.backlog.len(), 1);
        let (m, fx) = run(&m, AgentInput::PlaybackFinished);
        assert!(matches!(m.state, AgentState::Thinking { .. }));
        assert!(m.backlog.is_empty());
        assert_eq!(fx[0], status(STATUS_PLEASE_SPEAK));
        assert_eq!(fx[1], status(STATUS_THINKING));
        assert!(matches!(&fx[2], Effect::InvokeBackend { text, .. } if text == "globe"));
    }

    #[test]
    fn last_user_leaving_suspends() {
        let playing = at(AgentState::Playback {
            text: "hi".into(),
            finish_s: 11.0,
            pending: AgentAction::Navigate { nav_point_id: "p".into() },
        });
        let (m, fx) = run(
            &playing,
            AgentInput::UserExited { user_id: "u".into(), remaining_users: 0 },
        );
        assert_eq!(m.state, AgentState::Suspend);
        assert!(fx.is_empty());
        let (m, _) = run(
            &playing,
            AgentInput::UserExited { user_id: "u".into(), remaining_users: 1 },
        );
        assert_eq!(m, playing);
    }

    #[test]
    fn timeout_apologizes() {
        let thinking = at(AgentState::Thinking { turn: 4, since_s: 0.0 });
        let (m, fx) = run(&thinking, AgentInput::ThinkTimeout { turn: 4 });
        assert!(matches!(&m.state, AgentState::Playback { pending: AgentAction::None, .. }));
        assert!(fx.iter().any(|e| matches!(e, Effect::Speak { text, .. } if text == THINK_TIMEOUT_REPLY)));
    }

    #[test]
    fn playback_durations() {
        assert!((playback_duration(&"x".repeat(150)) - 10.0).abs() < 1e-12);
        assert_eq!(playback_duration(""), 1.0);
        assert_eq!(playback_duration(&"x".repeat(15)), 1.0);
    }
}
