//! Session log: one JSON record per line, discriminated by `kind`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::Condition;
use crate::agent::StateInterval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub world: String,
    pub world_width_m: f64,
    pub world_height_m: f64,
    pub condition: Condition,
    pub persona: String,
    pub seed: u64,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_id: Option<String>,
    pub sample_period_s: f64,
    pub tick_dt_s: f64,
    pub duration_cap_s: f64,
    /// Full echo of the configuration that produced the log.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t_s: f64,
    pub avatar_id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatLine {
    pub t_s: f64,
    pub from: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavRequest {
    pub t_s: f64,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub trajectory: Vec<TrajectorySample>,
    pub chat: Vec<ChatLine>,
    pub agent_intervals: Vec<StateInterval>,
    pub nav_requests: Vec<NavRequest>,
    pub entry_t_s: f64,
    pub exit_t_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Header(SessionHeader),
    Traj(TrajectorySample),
    Chat(ChatLine),
    Interval(StateInterval),
    Nav(NavRequest),
    Footer { entry_t_s: f64, exit_t_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("malformed session log (line {line}): {message}")]
pub struct MalformedLog {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl MalformedLog {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

impl SessionLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: Record| {
            out.push_str(&serde_json::to_string(&r).expect("log records serialize"));
            out.push('\n');
        };
        push(Record::Header(self.header.clone()));
        self.trajectory.iter().for_each(|s| push(Record::Traj(s.clone())));
        self.chat.iter().for_each(|c| push(Record::Chat(c.clone())));
        self.agent_intervals.iter().for_each(|i| push(Record::Interval(i.clone())));
        self.nav_requests.iter().for_each(|n| push(Record::Nav(n.clone())));
        push(Record::Footer { entry_t_s: self.entry_t_s, exit_t_s: self.exit_t_s });
        out
    }

    pub fn from_jsonl(text: &str) -> Result<SessionLog, MalformedLog> {
        let mut header = None;
        let mut footer = None;
        let (mut trajectory, mut chat, mut agent_intervals, mut nav_requests) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if footer.is_some() {
                return Err(MalformedLog::at(n, "record after footer"));
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| MalformedLog::at(n, e.to_string()))?;
            match rec {
                Record::Header(h) if header.is_none() && n == 1 => header = Some(h),
                Record::Header(_) => return Err(MalformedLog::at(n, "header must be the first record")),
                _ if header.is_none() => return Err(MalformedLog::at(n, "missing header")),
                Record::Traj(s) => trajectory.push(s),
                Record::Chat(c) => chat.push(c),
                Record::Interval(iv) => agent_intervals.push(iv),
                Record::Nav(r) => nav_requests.push(r),
                Record::Footer { entry_t_s, exit_t_s } => footer = Some((entry_t_s, exit_t_s)),
            }
        }
        let header = header.ok_or_else(|| MalformedLog::at(0, "empty log"))?;
        let (entry_t_s, exit_t_s) = footer.ok_or_else(|| MalformedLog::at(0, "missing footer"))?;
        let log = SessionLog { header, trajectory, chat, agent_intervals, nav_requests, entry_t_s, exit_t_s };
        log.validate()?;
        Ok(log)
    }

    /// Checks timestamp bounds and interval ordering.
    pub fn validate(&self) -> Result<(), MalformedLog> {
        let (t0, t1) = (self.entry_t_s, self.exit_t_s);
        if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
            return Err(MalformedLog::at(0, format!("entry {t0} must not be after exit {t1}")));
        }
        let within = |t: f64| t >= t0 - 1e-9 && t <= t1 + 1e-9;
        let stamps = self
            .trajectory
            .iter()
            .map(|s| s.t_s)
            .chain(self.chat.iter().map(|c| c.t_s))
            .chain(self.nav_requests.iter().map(|r| r.t_s))
            .chain(self.agent_intervals.iter().flat_map(|i| [i.t0_s, i.t1_s]));
        if let Some(t) = stamps.into_iter().find(|t| !within(*t)) {
            return Err(MalformedLog::at(0, format!("timestamp {t} outside [{t0}, {t1}]")));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for iv in &self.agent_intervals {
            if iv.t1_s < iv.t0_s || iv.t0_s < prev_end - 1e-9 {
                return Err(MalformedLog::at(0, format!("agent interval {}..{} out of order", iv.t0_s, iv.t1_s)));
            }
            prev_end = iv.t1_s;
        }
        Ok(())
    }

    /// Trajectory samples of the session's user.
    pub fn user_samples(&self) -> impl Iterator<Item = &TrajectorySample> {
        let user = self.header.user_id.as_str();
        self.trajectory.iter().filter(move |s| s.avatar_id == user)
    }
}
