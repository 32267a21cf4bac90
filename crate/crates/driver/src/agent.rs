//! Runs an [`AgentRuntime`] against a live driver connection.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use pixie_core::agent::log::write_jsonl;
use pixie_core::agent::{
    AgentConfig, AgentLogRecord, AgentRequest, AgentRuntime, Decision, DecisionBackend, StateInterval,
};
use pixie_core::protocol::{Command, EnvironmentSnapshot, EventType, JoinSpec};
use pixie_core::world::{AvatarKind, PathStatus};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::{DriverClient, DriverError};

#[derive(Debug, Clone, Default)]
pub struct RunAgentConfig {
    pub agent: AgentConfig,
    /// Where the agent's avatar appears; `None` means the world spawn.
    pub post: Option<(f64, f64)>,
    /// Agent JSONL log, written when the loop ends for any reason.
    pub log_path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct AgentOutcome {
    pub records: Vec<AgentLogRecord>,
    pub intervals: Vec<StateInterval>,
    /// Why the loop stopped, if it was not asked to.
    pub error: Option<DriverError>,
}

pub struct AgentSession {
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<AgentOutcome>,
}

impl AgentSession {
    /// Asks the loop to leave the room and waits for it.
    pub async fn stop(mut self) -> AgentOutcome {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.wait().await
    }

    pub async fn wait(self) -> AgentOutcome {
        self.task.await.unwrap_or_else(|e| AgentOutcome {
            records: vec![],
            intervals: vec![],
            error: Some(DriverError::Payload(format!("agent task failed: {e}"))),
        })
    }
}

/// Joins the room as the agent and wires driver events through the state
/// machine. Backend calls run on the blocking pool so a slow backend never
/// stalls event handling (and the filler message still goes out).
pub fn run_agent(client: DriverClient, backend: Box<dyn DecisionBackend>, config: RunAgentConfig) -> AgentSession {
    let (stop_tx, stop_rx) = oneshot::channel();
    let task = tokio::spawn(agent_loop(client, backend, config, stop_rx));
    AgentSession { stop: Some(stop_tx), task }
}

struct Loop {
    client: DriverClient,
    backend: Arc<Mutex<Box<dyn DecisionBackend>>>,
    decisions: mpsc::UnboundedSender<(u64, Decision)>,
    now_s: f64,
}

impl Loop {
    async fn execute(&mut self, rt: &mut AgentRuntime, mut reqs: Vec<AgentRequest>) -> Result<(), DriverError> {
        while !reqs.is_empty() {
            let mut next = Vec::new();
            for r in reqs {
                match r {
                    AgentRequest::Command(cmd) => {
                        let is_dest = matches!(cmd, Command::SetDestination { .. });
                        let res = self.client.request(cmd).await;
                        let res = match res {
                            Err(DriverError::Remote(_)) if !is_dest => continue,
                            Err(DriverError::Remote(_)) => serde_json::Value::Null,
                            other => other?,
                        };
                        if is_dest {
                            let status = serde_json::from_value(res)
                                .unwrap_or(PathStatus { feasible: false, remaining_m: None });
                            next.extend(rt.on_destination_status(status, self.now_s));
                        }
                    }
                    AgentRequest::Decide { turn, utterance, context, .. } => {
                        let backend = self.backend.clone();
                        let out = self.decisions.clone();
                        tokio::task::spawn_blocking(move || {
                            let d = backend.lock().unwrap_or_else(|e| e.into_inner()).respond(&utterance, &context);
                            let _ = out.send((turn, d));
                        });
                    }
                }
            }
            reqs = next;
        }
        Ok(())
    }
}

async fn agent_loop(
    client: DriverClient,
    backend: Box<dyn DecisionBackend>,
    config: RunAgentConfig,
    mut stop: oneshot::Receiver<()>,
) -> AgentOutcome {
    let agent_id = config.agent.agent_id.clone();
    let join = Command::Join {
        avatar: JoinSpec {
            id: agent_id.clone(),
            kind: AvatarKind::Agent,
            x: config.post.map(|p| p.0),
            y: config.post.map(|p| p.1),
        },
    };
    let setup = async {
        client.request(join).await?;
        client.subscribe(EventType::ALL.to_vec()).await?;
        client.request_as::<EnvironmentSnapshot>(Command::GetEnvironment {}).await
    };
    let snapshot = match setup.await {
        Ok(s) => s,
        Err(e) => return finish(&config, vec![], vec![], Some(e)),
    };

    let (dec_tx, mut dec_rx) = mpsc::unbounded_channel();
    let mut lp = Loop {
        client: client.clone(),
        backend: Arc::new(Mutex::new(backend)),
        decisions: dec_tx,
        now_s: snapshot.clock_s,
    };
    let (mut rt, initial) = AgentRuntime::new(config.agent.clone(), snapshot);
    let mut error = lp.execute(&mut rt, initial).await.err();

    while error.is_none() {
        tokio::select! {
            _ = &mut stop => {
                let _ = client.request(Command::Leave { avatar_id: agent_id.clone() }).await;
                break;
            }
            frame = client.next_event() => {
                let Some(frame) = frame else {
                    error = Some(DriverError::Lost);
                    break;
                };
                lp.now_s = lp.now_s.max(frame.t_s);
                let reqs = rt.handle_event(&frame);
                error = lp.execute(&mut rt, reqs).await.err();
            }
            Some((turn, d)) = dec_rx.recv() => {
                let reqs = rt.deliver_decision(turn, d, lp.now_s);
                error = lp.execute(&mut rt, reqs).await.err();
            }
        }
    }
    let intervals = rt.intervals(lp.now_s);
    finish(&config, rt.log().to_vec(), intervals, error)
}

fn finish(
    config: &RunAgentConfig,
    records: Vec<AgentLogRecord>,
    intervals: Vec<StateInterval>,
    mut error: Option<DriverError>,
) -> AgentOutcome {
    if let Some(path) = &config.log_path {
        let written = std::fs::File::create(path).and_then(|f| write_jsonl(&records, std::io::BufWriter::new(f)));
        if let (Err(e), None) = (written, &error) {
            error = Some(DriverError::Payload(format!("cannot write {}: {e}", path.display())));
        }
    }
    AgentOutcome { records, intervals, error }
}
