//! Lock-step session loop: visitor, then agent, then one world tick.

use std::time::{Duration, Instant};

use super::bot::Bot;
use super::config::{load_world_source, Condition, SessionConfig};
use super::log::{ChatLine, NavRequest, SessionHeader, SessionLog, TrajectorySample};
use super::HarnessError;
use crate::agent::{
    AgentConfig, AgentRequest, AgentRuntime, DecisionBackend, FixedRouteBackend, RuleBackend,
    StateInterval,
};
use crate::protocol::{Command, Event, EventFrame, JoinSpec, WorldHost};
use crate::world::{AvatarKind, PathStatus, Position, Target, WorldSpec};

pub const USER_ID: &str = "visitor";

pub struct VisitorView<'a> {
    pub now_s: f64,
    pub world: &'a WorldSpec,
    pub me: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VisitorAction {
    /// Chat; `request` names the nav point this utterance asks for.
    Say { text: String, request: Option<String> },
    MoveTo(Target),
    Leave,
}

/// A simulated user driven by the session loop.
pub trait Visitor {
    fn id(&self) -> &str;
    fn observe(&mut self, frame: &EventFrame);
    fn act(&mut self, view: &VisitorView) -> Vec<VisitorAction>;
    fn on_destination(&mut self, status: PathStatus, now_s: f64);
}

pub(crate) struct LockstepParams {
    pub seed: u64,
    pub tick_dt_s: f64,
    pub sample_every: u64,
    pub duration_cap_s: f64,
    pub time_scale: Option<f64>,
    pub agent: AgentConfig,
}

/// Everything a run produced, before the header is attached.
pub(crate) struct Recorded {
    pub trajectory: Vec<TrajectorySample>,
    pub chat: Vec<ChatLine>,
    pub agent_intervals: Vec<StateInterval>,
    pub nav_requests: Vec<NavRequest>,
    pub entry_t_s: f64,
    pub exit_t_s: f64,
}

struct AgentSlot {
    runtime: AgentRuntime,
    backend: Box<dyn DecisionBackend>,
}

struct Lockstep<'v> {
    host: WorldHost,
    agent: Option<AgentSlot>,
    visitor: &'v mut dyn Visitor,
    user_present: bool,
    chat: Vec<ChatLine>,
    trajectory: Vec<TrajectorySample>,
    nav_requests: Vec<NavRequest>,
}

impl Lockstep<'_> {
    fn run_agent(&mut self, mut reqs: Vec<AgentRequest>) {
        let Some(slot) = self.agent.as_mut() else { return };
        while !reqs.is_empty() {
            let mut next = Vec::new();
            for r in reqs {
                let now = self.host.clock_s();
                match r {
                    AgentRequest::Command(cmd) => {
                        let res = self.host.execute(&cmd);
                        if let Command::SetDestination { .. } = cmd {
                            let status = res
                                .ok()
                                .and_then(|v| serde_json::from_value(v).ok())
                                .unwrap_or(PathStatus { feasible: false, remaining_m: None });
                            next.extend(slot.runtime.on_destination_status(status, now));
                        }
                    }
                    AgentRequest::Decide { turn, utterance, context, .. } => {
                        let d = slot.backend.respond(&utterance, &context);
                        next.extend(slot.runtime.deliver_decision(turn, d, now));
                    }
                }
            }
            reqs = next;
        }
    }

    /// Delivers pending events until the host goes quiet.
    fn dispatch(&mut self) {
        loop {
            let frames = self.host.drain_events();
            if frames.is_empty() {
                return;
            }
            for f in frames {
                if let Event::ChatReceived { from, text } = &f.event {
                    self.chat.push(ChatLine { t_s: f.t_s, from: from.clone(), text: text.clone() });
                }
                if let Some(slot) = self.agent.as_mut() {
                    let reqs = slot.runtime.handle_event(&f);
                    self.run_agent(reqs);
                }
                if self.user_present {
                    self.visitor.observe(&f);
                }
            }
        }
    }

    fn sample(&mut self) {
        let t_s = self.host.clock_s();
        for s in self.host.room().samples() {
            self.trajectory.push(TrajectorySample { t_s, avatar_id: s.id, x: s.x, y: s.y });
        }
    }

    fn perform(&mut self, action: VisitorAction) {
        let now = self.host.clock_s();
        let me = self.visitor.id().to_string();
        match action {
            VisitorAction::Say { text, request } => {
                if let Some(target) = request {
                    self.nav_requests.push(NavRequest { t_s: now, target });
                }
                let _ = self.host.execute(&Command::SendChat { from: me, text });
            }
            VisitorAction::MoveTo(target) => {
                let status = self
                    .host
                    .execute(&Command::SetDestination { avatar_id: me, target })
                    .ok()
                    .and_then(|v| serde_json::from_value(v).ok())
                    .unwrap_or(PathStatus { feasible: false, remaining_m: None });
                self.visitor.on_destination(status, now);
            }
            VisitorAction::Leave => {
                let _ = self.host.execute(&Command::Leave { avatar_id: me });
                self.user_present = false;
            }
        }
    }
}

pub(crate) fn run_lockstep(
    world: WorldSpec,
    params: &LockstepParams,
    backend: Option<Box<dyn DecisionBackend>>,
    visitor: &mut dyn Visitor,
) -> Result<Recorded, HarnessError> {
    let host = WorldHost::from_world(world, params.seed, params.tick_dt_s);
    let mut run = Lockstep {
        host,
        agent: None,
        visitor,
        user_present: false,
        chat: Vec::new(),
        trajectory: Vec::new(),
        nav_requests: Vec::new(),
    };

    if let Some(backend) = backend {
        let agent_id = params.agent.agent_id.clone();
        run.host
            .execute(&Command::Join {
                avatar: JoinSpec { id: agent_id, kind: AvatarKind::Agent, x: None, y: None },
            })
            .map_err(|e| HarnessError::AgentSpawn(e.message))?;
        run.host.drain_events();
        let (runtime, reqs) = AgentRuntime::new(params.agent.clone(), run.host.snapshot());
        run.agent = Some(AgentSlot { runtime, backend });
        run.run_agent(reqs);
    }

    let user_id = run.visitor.id().to_string();
    run.host
        .execute(&Command::Join {
            avatar: JoinSpec { id: user_id.clone(), kind: AvatarKind::User, x: None, y: None },
        })
        .map_err(|e| HarnessError::InvalidConfig(e.message))?;
    run.user_present = true;
    let entry_t_s = run.host.clock_s();
    run.sample();

    // only paced runs read the wall clock
    let started = params.time_scale.map(|_| Instant::now());
    let exit_t_s = loop {
        run.dispatch();
        let now = run.host.clock_s();
        if now - entry_t_s >= params.duration_cap_s - 1e-9 {
            run.perform(VisitorAction::Leave);
            run.dispatch();
            break now;
        }
        if let Some(slot) = run.agent.as_mut() {
            let reqs = slot.runtime.poll(now);
            run.run_agent(reqs);
        }
        let me = run.host.room().avatar(&user_id).map(|a| a.position).unwrap_or_default();
        let actions = {
            let view = VisitorView { now_s: now, world: run.host.room().world(), me };
            run.visitor.act(&view)
        };
        for a in actions {
            if run.user_present {
                run.perform(a);
            }
        }
        run.dispatch();
        if !run.user_present {
            break now;
        }
        run.host.advance();
        if run.host.room().ticks() % params.sample_every == 0 {
            run.sample();
        }
        if let (Some(scale), Some(started)) = (params.time_scale, started) {
            let due = Duration::from_secs_f64((run.host.clock_s() - entry_t_s) / scale);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    };

    let agent_intervals = run.agent.as_ref().map_or_else(Vec::new, |s| s.runtime.intervals(exit_t_s));
    Ok(Recorded {
        trajectory: run.trajectory,
        chat: run.chat,
        agent_intervals,
        nav_requests: run.nav_requests,
        entry_t_s,
        exit_t_s,
    })
}

/// Runs one bot session under `config`.
pub fn run_session(config: &SessionConfig) -> Result<SessionLog, HarnessError> {
    run_session_in(config, None)
}

/// Like [`run_session`], resolving a relative world path against `base`.
pub fn run_session_in(
    config: &SessionConfig,
    base: Option<&std::path::Path>,
) -> Result<SessionLog, HarnessError> {
    config.validate()?;
    let world = load_world_source(&config.world, base)?;
    let backend: Option<Box<dyn DecisionBackend>> = match config.condition {
        Condition::OnDemand => Some(Box::new(RuleBackend::new(config.think_s))),
        Condition::FixedRoute => {
            Some(Box::new(FixedRouteBackend::new(world.fixed_route.clone(), config.think_s)))
        }
        Condition::Control => None,
    };
    let agent_id = backend.as_ref().map(|_| config.agent.agent_id.clone());
    let header = SessionHeader {
        world: world.name.clone(),
        world_width_m: world.width_m,
        world_height_m: world.height_m,
        condition: config.condition,
        persona: config.persona.tag(),
        seed: config.seed,
        user_id: USER_ID.to_string(),
        agent_id: agent_id.clone(),
        sample_period_s: config.sample_every() as f64 * config.tick_dt_s,
        tick_dt_s: config.tick_dt_s,
        duration_cap_s: config.duration_cap_s,
        config: serde_json::to_value(config).expect("config serializes"),
    };
    let mut bot = Bot::new(
        USER_ID,
        agent_id.as_deref(),
        config.condition,
        &config.persona,
        &world,
        config.seed,
        0.0,
    );
    let params = LockstepParams {
        seed: config.seed,
        tick_dt_s: config.tick_dt_s,
        sample_every: config.sample_every(),
        duration_cap_s: config.duration_cap_s,
        time_scale: config.time_scale,
        agent: config.agent.clone(),
    };
    let rec = run_lockstep(world, &params, backend, &mut bot)?;
    Ok(SessionLog {
        header,
        trajectory: rec.trajectory,
        chat: rec.chat,
        agent_intervals: rec.agent_intervals,
        nav_requests: rec.nav_requests,
        entry_t_s: rec.entry_t_s,
        exit_t_s: rec.exit_t_s,
    })
}
