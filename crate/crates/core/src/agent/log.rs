use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::machine::{AgentInput, Effect};

/// One line of the agent JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLogRecord {
    pub t_s: f64,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<AgentInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<Effect>,
}

/// Time the agent spent in one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInterval {
    pub t0_s: f64,
    pub t1_s: f64,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reached: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTime {
    pub mean_s: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std_s: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("log contains no completed user turn")]
pub struct NoSamples;

/// Mean and sample standard deviation.
pub fn mean_std(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

/// Latency from each completed user message to the start of the playback
/// it produced. Messages and playbacks pair up first-in first-out.
pub fn response_latencies(records: &[AgentLogRecord]) -> Vec<f64> {
    let mut pending = VecDeque::new();
    let mut latencies = Vec::new();
    let mut prev_state = "";
    for r in records {
        if matches!(r.input, Some(AgentInput::UserMessageComplete { .. })) {
            pending.push_back(r.t_s);
        }
        if r.input.is_some() {
            if r.state == "Playback" && prev_state != "Playback" {
                if let Some(t0) = pending.pop_front() {
                    latencies.push(r.t_s - t0);
                }
            }
            if r.state == "Suspend" {
                pending.clear();
            }
            prev_state = &r.state;
        }
    }
    latencies
}

pub fn measure_response_time(records: &[AgentLogRecord]) -> Result<ResponseTime, NoSamples> {
    let latencies = response_latencies(records);
    let (mean_s, std_s) = mean_std(&latencies).ok_or(NoSamples)?;
    Ok(ResponseTime {
        mean_s,
        std_s,
        n: latencies.len(),
    })
}

pub fn write_jsonl(records: &[AgentLogRecord], mut out: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl(text: &str) -> Result<Vec<AgentLogRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
