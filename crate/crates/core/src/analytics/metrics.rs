use crate::agent::StateInterval;
use crate::harness::{Condition, MalformedLog, SessionLog};

/// Seconds from entry to exit.
pub fn dwell_time(log: &SessionLog) -> Result<f64, MalformedLog> {
    log.validate()?;
    Ok(log.exit_t_s - log.entry_t_s)
}

fn playback_end_after(t: f64, intervals: &[StateInterval]) -> f64 {
    let mut start = t;
    // walk forward while a playback is still running at `start`
    while let Some(iv) = intervals
        .iter()
        .find(|iv| iv.state == "Playback" && iv.t0_s <= start && start < iv.t1_s)
    {
        start = iv.t1_s;
    }
    start
}

/// Time the user spent on their own after being delivered somewhere.
///
/// Each segment starts once the agent has arrived and stopped talking and
/// ends at the next navigation request, the agent's next walk or the
/// user's exit, whichever comes first. A request made while the agent is
/// still walking therefore does not open an unbounded segment. `None` for
/// sessions without a guide.
pub fn free_exploration_time(log: &SessionLog) -> Result<Option<f64>, MalformedLog> {
    log.validate()?;
    if log.header.condition == Condition::Control {
        return Ok(None);
    }
    let mut total = 0.0;
    let walks: Vec<&StateInterval> =
        log.agent_intervals.iter().filter(|iv| iv.state == "PerformingAction").collect();
    for iv in walks.iter().filter(|iv| iv.reached == Some(true)) {
        let arrived = iv.t1_s;
        let start = playback_end_after(arrived, &log.agent_intervals).min(log.exit_t_s);
        let next_request = log.nav_requests.iter().map(|r| r.t_s).filter(|&t| t >= arrived);
        let next_walk = walks.iter().map(|w| w.t0_s).filter(|&t| t >= arrived);
        let end = next_request.chain(next_walk).fold(log.exit_t_s, f64::min);
        total += (end - start).max(0.0);
    }
    Ok(Some(total))
}

/// Time spent thinking before each reply.
pub fn response_times(log: &SessionLog) -> Vec<f64> {
    let ivs = &log.agent_intervals;
    ivs.iter()
        .enumerate()
        .filter(|(_, iv)| iv.state == "Playback")
        .map(|(i, iv)| match i.checked_sub(1).map(|j| &ivs[j]) {
            Some(prev) if prev.state == "Thinking" && (prev.t1_s - iv.t0_s).abs() < 1e-9 => {
                prev.t1_s - prev.t0_s
            }
            _ => 0.0,
        })
        .collect()
}
