//! Expected transition table for the agent state machine, shared by the
//! core table test and the CLI acceptance run.
#![allow(dead_code)]

use pixie_core::agent::{
    step, AgentAction, AgentInput, AgentState, Effect, Machine, PlaybackTiming, STATUS_PLEASE_SPEAK,
    STATUS_THINKING,
};
use rand::{Rng, SeedableRng};

pub fn state(label: &str) -> AgentState {
    let nav = AgentAction::Navigate { nav_point_id: "p2".into() };
    match label {
        "S" => AgentState::Suspend,
        "W" => AgentState::Waiting,
        "L" => AgentState::PlayerListening { from: "u1".into() },
        "T" => AgentState::Thinking { turn: 1, since_s: 0.0 },
        "B0" => AgentState::Playback { text: "hi".into(), finish_s: 5.0, pending: AgentAction::None },
        "BN" => AgentState::Playback { text: "hi".into(), finish_s: 5.0, pending: nav },
        "BE" => AgentState::Playback {
            text: "hi".into(),
            finish_s: 5.0,
            pending: AgentAction::Emote { name: "wave".into() },
        },
        "A" => AgentState::PerformingAction { target: "p2".into() },
        _ => unreachable!(),
    }
}

pub fn input(label: &str) -> AgentInput {
    match label {
        "Ent" => AgentInput::UserEntered { user_id: "u2".into() },
        "Ex0" => AgentInput::UserExited { user_id: "u1".into(), remaining_users: 0 },
        "Ex1" => AgentInput::UserExited { user_id: "u2".into(), remaining_users: 1 },
        "MS" => AgentInput::UserMessageStart { from: "u1".into() },
        "MC" => AgentInput::UserMessageComplete { from: "u1".into(), text: "go".into() },
        "DR1" => AgentInput::DecisionReady {
            turn: 1,
            reply: "ok".into(),
            action: AgentAction::Navigate { nav_point_id: "p3".into() },
        },
        "DR9" => AgentInput::DecisionReady { turn: 9, reply: "late".into(), action: AgentAction::None },
        "PF" => AgentInput::PlaybackFinished,
        "AF" => AgentInput::ActionFinished { reached: true },
        "AFx" => AgentInput::ActionFinished { reached: false },
        "TO1" => AgentInput::ThinkTimeout { turn: 1 },
        "TO9" => AgentInput::ThinkTimeout { turn: 9 },
        _ => unreachable!(),
    }
}

pub fn effect_label(e: &Effect) -> String {
    match e {
        Effect::SetStatusText { text } if text == STATUS_PLEASE_SPEAK => "please".into(),
        Effect::SetStatusText { text } if text == STATUS_THINKING => "thinking".into(),
        Effect::SetStatusText { text } => format!("status:{text}"),
        Effect::InvokeBackend { .. } => "invoke".into(),
        Effect::Speak { .. } => "speak".into(),
        Effect::SetDestination { .. } => "dest".into(),
        Effect::PlayEmote { .. } => "emote".into(),
    }
}

pub fn label_of(s: &AgentState) -> &'static str {
    match s {
        AgentState::Suspend => "S",
        AgentState::Waiting => "W",
        AgentState::PlayerListening { .. } => "L",
        AgentState::Thinking { .. } => "T",
        AgentState::Playback { pending: AgentAction::None, .. } => "B0",
        AgentState::Playback { pending: AgentAction::Navigate { .. }, .. } => "BN",
        AgentState::Playback { pending: AgentAction::Emote { .. }, .. } => "BE",
        AgentState::PerformingAction { .. } => "A",
    }
}

pub const STATES: [&str; 8] = ["S", "W", "L", "T", "B0", "BN", "BE", "A"];
pub const INPUTS: [&str; 12] = ["Ent", "Ex0", "Ex1", "MS", "MC", "DR1", "DR9", "PF", "AF", "AFx", "TO1", "TO9"];

/// Expected (next state, effects, queued) for each non-trivial pair.
/// Pairs not listed keep their state with no effects and no queueing.
pub fn expected(s: &str, i: &str) -> (&'static str, &'static [&'static str], bool) {
    const SPEAK: &[&str] = &["status:", "speak"];
    match (s, i) {
        (_, "Ex0") => ("S", &[], false),
        ("S", "Ent") => ("W", &["please"], false),
        ("W", "MS") => ("L", &[], false),
        ("W" | "L", "MC") => ("T", &["thinking", "invoke"], false),
        ("T", "DR1") => ("BN", SPEAK, false),
        ("T", "TO1") => ("B0", SPEAK, false),
        ("B0", "PF") => ("W", &["please"], false),
        ("BN", "PF") => ("A", &["dest"], false),
        ("BE", "PF") => ("W", &["emote", "please"], false),
        ("A", "AF" | "AFx") => ("W", &["please"], false),
        ("T" | "B0" | "BN" | "BE" | "A", "MC") => (leak(s), &[], true),
        _ => (leak(s), &[], false),
    }
}

fn leak(s: &str) -> &'static str {
    STATES.iter().find(|x| **x == s).copied().unwrap()
}

/// Every (state, input) pair whose observed behavior differs from
/// [`expected`], described in one line each.
pub fn table_mismatches() -> Vec<String> {
    let timing = PlaybackTiming::default();
    let mut bad = Vec::new();
    for s in STATES {
        for i in INPUTS {
            let m = Machine { state: state(s), ..Machine::default() };
            let (next, effects) = step(&m, &input(i), 10.0, &timing);
            let (want_state, want_effects, queued) = expected(s, i);
            let got: Vec<String> = effects.iter().map(effect_label).collect();
            let scheduled = match (&next.state, want_effects.contains(&"speak")) {
                (AgentState::Playback { finish_s, .. }, true) => *finish_s > 10.0,
                _ => true,
            };
            if label_of(&next.state) != want_state
                || got != want_effects
                || next.backlog.len() != usize::from(queued)
                || !scheduled
            {
                bad.push(format!(
                    "({s}, {i}): got {} {got:?} backlog {}",
                    label_of(&next.state),
                    next.backlog.len()
                ));
            }
        }
    }
    bad
}

/// Abstract inputs; turn-bearing ones are resolved against the live state.
#[derive(Debug, Clone)]
pub enum Op {
    Enter,
    ExitLast,
    ExitOther,
    Start,
    Complete(u8),
    Decide { current: bool, navigate: bool },
    PlaybackDone,
    ActionDone(bool),
    Timeout { current: bool },
}

pub fn concretize(op: &Op, m: &Machine) -> AgentInput {
    let turn = |current: bool| match (&m.state, current) {
        (AgentState::Thinking { turn, .. }, true) => *turn,
        _ => m.next_turn + 7,
    };
    match op {
        Op::Enter => AgentInput::UserEntered { user_id: "u".into() },
        Op::ExitLast => AgentInput::UserExited { user_id: "u".into(), remaining_users: 0 },
        Op::ExitOther => AgentInput::UserExited { user_id: "v".into(), remaining_users: 1 },
        Op::Start => AgentInput::UserMessageStart { from: "u".into() },
        Op::Complete(n) => AgentInput::UserMessageComplete { from: "u".into(), text: format!("m{n}") },
        Op::Decide { current, navigate } => AgentInput::DecisionReady {
            turn: turn(*current),
            reply: "r".into(),
            action: if *navigate {
                AgentAction::Navigate { nav_point_id: "p".into() }
            } else {
                AgentAction::None
            },
        },
        Op::PlaybackDone => AgentInput::PlaybackFinished,
        Op::ActionDone(r) => AgentInput::ActionFinished { reached: *r },
        Op::Timeout { current } => AgentInput::ThinkTimeout { turn: turn(*current) },
    }
}

pub fn random_op(rng: &mut impl Rng) -> Op {
    match rng.random_range(0..9) {
        0 => Op::Enter,
        1 => Op::ExitLast,
        2 => Op::ExitOther,
        3 => Op::Start,
        4 => Op::Complete(rng.random()),
        5 => Op::Decide { current: rng.random(), navigate: rng.random() },
        6 => Op::PlaybackDone,
        7 => Op::ActionDone(rng.random()),
        _ => Op::Timeout { current: rng.random() },
    }
}

/// Runs `n` seeded random input sequences and counts `SetDestination`
/// effects that were not part of a Playback to PerformingAction step.
pub fn stray_destinations(n: usize, seed: u64) -> usize {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let timing = PlaybackTiming::default();
    let mut stray = 0;
    for _ in 0..n {
        let mut m = Machine::default();
        for k in 0..rng.random_range(0..60) {
            let input = concretize(&random_op(&mut rng), &m);
            let (next, effects) = step(&m, &input, k as f64, &timing);
            let legal = matches!(m.state, AgentState::Playback { .. })
                && matches!(next.state, AgentState::PerformingAction { .. });
            stray += effects.iter().filter(|e| matches!(e, Effect::SetDestination { .. }) && !legal).count();
            m = next;
        }
    }
    stray
}
