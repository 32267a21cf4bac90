//! Browser demo over the core crate. Each export takes plain arguments
//! and returns a JSON string; errors come back as `{"error": "..."}`.
//!
//! Build with `wasm-pack build crates/web --target web --out-dir www/pkg`.

use pixie_core::agent::{
    rule_backend_decide, AgentAction, HistoryTurn, ObservationContext, PlaybackTiming,
};
use pixie_core::analytics::{heatmap, metric_row, DEFAULT_CELL_SIZE_M};
use pixie_core::harness::{load_world_source, run_session, Condition, SessionConfig};
use pixie_core::protocol::WorldHost;
use pixie_core::world::{find_path as plan, Position, WorldSpec};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn world(source: &str) -> Result<WorldSpec, String> {
    load_world_source(source, None).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Grid {
    name: String,
    width_m: f64,
    height_m: f64,
    cell_size_m: f64,
    rows: usize,
    cols: usize,
    /// Row-major, row 0 at the bottom.
    walkable: Vec<bool>,
    nav_points: Vec<(String, String, f64, f64)>,
}

/// Walkability grid and nav points of a bundled world, for drawing.
pub fn world_layout(source: &str) -> String {
    match world(source) {
        Ok(w) => {
            let grid = Grid {
                name: w.name.clone(),
                width_m: w.width_m,
                height_m: w.height_m,
                cell_size_m: w.cell_size_m,
                rows: w.rows(),
                cols: w.cols(),
                walkable: w.walkable_cells().fold(vec![false; w.rows() * w.cols()], |mut v, c| {
                    v[c.row * w.cols() + c.col] = true;
                    v
                }),
                nav_points: w
                    .nav_points
                    .iter()
                    .map(|p| (p.id.clone(), p.name.clone(), p.position.x, p.position.y))
                    .collect(),
            };
            serde_json::to_string(&grid).expect("grid serializes")
        }
        Err(e) => error(e),
    }
}

/// Shortest path between two points: `{cells: [[row, col]...], waypoints, length_m}`.
pub fn shortest_path(source: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> String {
    let w = match world(source) {
        Ok(w) => w,
        Err(e) => return error(e),
    };
    match plan(&w, Position::new(x0, y0), Position::new(x1, y1)) {
        Ok(p) => json!({
            "cells": p.cells.iter().map(|c| [c.row, c.col]).collect::<Vec<_>>(),
            "waypoints": p.waypoints.iter().map(|q| [q.x, q.y]).collect::<Vec<_>>(),
            "length_m": p.total_length_m,
        })
        .to_string(),
        Err(e) => error(e),
    }
}

/// One bot session with its metrics and dwell heatmap.
pub fn simulate_session(source: &str, condition: &str, seed: u64) -> String {
    let condition: Condition = match condition.parse() {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let config = SessionConfig { world: source.to_string(), condition, seed, ..SessionConfig::default() };
    let run = || -> Result<String, String> {
        let log = run_session(&config).map_err(|e| e.to_string())?;
        let row = metric_row("demo", &log, DEFAULT_CELL_SIZE_M).map_err(|e| e.to_string())?;
        let h = heatmap(&log, DEFAULT_CELL_SIZE_M, true).map_err(|e| e.to_string())?;
        let path: Vec<[f64; 2]> = log.user_samples().map(|s| [s.x, s.y]).collect();
        Ok(json!({
            "metrics": row,
            "heatmap": { "rows": h.rows, "cols": h.cols, "cells": h.cells },
            "trajectory": path,
            "chat": log.chat,
        })
        .to_string())
    };
    run().unwrap_or_else(error)
}

/// The rule agent without a room: answers text and moves to where it
/// promised to go.
#[wasm_bindgen]
pub struct AgentChat {
    ctx: ObservationContext,
    timing: PlaybackTiming,
}

#[wasm_bindgen]
impl AgentChat {
    #[wasm_bindgen(constructor)]
    pub fn new(source: &str) -> Result<AgentChat, JsValue> {
        let w = world(source).map_err(|e| JsValue::from_str(&e))?;
        let spawn = w.spawn;
        let snapshot = WorldHost::from_world(w, 0, 0.1).snapshot();
        let ctx = ObservationContext {
            room: snapshot.room,
            nav_points: snapshot.nav_points,
            agent: pixie_core::agent::observation::AgentPoint { x: spawn.x, y: spawn.y },
            ..ObservationContext::default()
        };
        Ok(AgentChat { ctx, timing: PlaybackTiming::default() })
    }

    /// `{reply, action, playback_s, agent: {x, y}}`.
    pub fn say(&mut self, text: &str) -> String {
        let t = self.ctx.history.last().map_or(0.0, |h| h.t_s + 1.0);
        self.ctx.history.push(HistoryTurn { t_s: t, from: "you".into(), text: text.into() });
        let d = rule_backend_decide(text, &self.ctx);
        if let AgentAction::Navigate { nav_point_id } = &d.action {
            if let Some(p) = self.ctx.nav_point(nav_point_id) {
                self.ctx.agent = pixie_core::agent::observation::AgentPoint { x: p.x, y: p.y };
            }
        }
        self.ctx.history.push(HistoryTurn { t_s: t, from: "pixie".into(), text: d.reply.clone() });
        json!({
            "reply": d.reply,
            "action": d.action,
            "playback_s": self.timing.duration(&d.reply),
            "agent": self.ctx.agent,
        })
        .to_string()
    }
}

#[wasm_bindgen(js_name = worldLayout)]
pub fn world_layout_js(source: &str) -> String {
    world_layout(source)
}

#[wasm_bindgen(js_name = findPath)]
pub fn find_path_js(source: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> String {
    shortest_path(source, x0, y0, x1, y1)
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(source: &str, condition: &str, seed: u32) -> String {
    simulate_session(source, condition, u64::from(seed))
}
