use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{NavPointInfo, UserInfo};

pub const DEFAULT_HISTORY_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub t_s: f64,
    pub from: String,
    pub text: String,
}

/// Everything the decision backend sees about the world.
///
/// Field order is the serialized key order; `room` is a sorted map so the
/// JSON form is byte-stable for identical inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationContext {
    pub room: BTreeMap<String, String>,
    pub clock_s: f64,
    pub agent: AgentPoint,
    pub users: Vec<UserInfo>,
    pub nav_points: Vec<NavPointInfo>,
    pub history: Vec<HistoryTurn>,
}

impl ObservationContext {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("observation serializes")
    }

    pub fn nav_point(&self, id: &str) -> Option<&NavPointInfo> {
        self.nav_points.iter().find(|p| p.id == id)
    }
}
