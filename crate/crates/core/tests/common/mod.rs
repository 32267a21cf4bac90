//! Hand-built session logs.
#![allow(dead_code)]

pub mod transitions;

use pixie_core::agent::StateInterval;
use pixie_core::harness::{Condition, NavRequest, SessionHeader, SessionLog, TrajectorySample};

pub fn header(condition: Condition) -> SessionHeader {
    SessionHeader {
        world: "hall".into(),
        world_width_m: 20.0,
        world_height_m: 10.0,
        condition,
        persona: "fixture".into(),
        seed: 0,
        user_id: "u".into(),
        agent_id: Some("pixie".into()),
        sample_period_s: 0.5,
        tick_dt_s: 0.1,
        duration_cap_s: 1800.0,
        config: serde_json::Value::Null,
    }
}

pub fn interval(t0: f64, t1: f64, state: &str) -> StateInterval {
    StateInterval { t0_s: t0, t1_s: t1, state: state.into(), target: None, reached: None }
}

pub fn walk(t0: f64, t1: f64, target: &str, reached: bool) -> StateInterval {
    StateInterval { t0_s: t0, t1_s: t1, state: "PerformingAction".into(), target: Some(target.into()), reached: Some(reached) }
}

pub fn nav(t: f64, target: &str) -> NavRequest {
    NavRequest { t_s: t, target: target.into() }
}

/// User standing still at `(x, y)` from `t0` up to (not including) `t1`.
pub fn still(t0: f64, t1: f64, x: f64, y: f64) -> Vec<TrajectorySample> {
    let n = ((t1 - t0) / 0.5).round() as usize;
    (0..n).map(|i| TrajectorySample { t_s: t0 + 0.5 * i as f64, avatar_id: "u".into(), x, y }).collect()
}

pub fn log(
    condition: Condition,
    exit: f64,
    intervals: Vec<StateInterval>,
    nav_requests: Vec<NavRequest>,
    trajectory: Vec<TrajectorySample>,
) -> SessionLog {
    SessionLog {
        header: header(condition),
        trajectory,
        chat: vec![],
        agent_intervals: intervals,
        nav_requests,
        entry_t_s: 0.0,
        exit_t_s: exit,
    }
}

/// Two guided stops: arrive/finish speaking at 90 and 200, next request at
/// 150, exit at 300.
pub fn free_exploration_fixture() -> SessionLog {
    log(
        Condition::OnDemand,
        300.0,
        vec![
            interval(0.0, 5.0, "Waiting"),
            interval(5.0, 7.0, "Thinking"),
            interval(7.0, 12.0, "Playback"),
            walk(12.0, 90.0, "p1", true),
            interval(90.0, 150.0, "Waiting"),
            interval(150.0, 152.0, "Thinking"),
            interval(152.0, 160.0, "Playback"),
            walk(160.0, 200.0, "p2", true),
            interval(200.0, 300.0, "Waiting"),
        ],
        vec![nav(5.0, "p1"), nav(150.0, "p2")],
        still(0.0, 300.0, 1.0, 1.0),
    )
}
