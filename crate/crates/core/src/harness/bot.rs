//! Scripted visitors standing in for study participants.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::config::{BotPersona, Condition};
use super::session::{Visitor, VisitorAction, VisitorView};
use crate::agent::FILLER_TEXT;
use crate::protocol::{Event, EventFrame};
use crate::world::{PathStatus, Position, Target, WorldSpec};

/// Phrasings for on-demand requests; `{}` is the nav point name.
pub const REQUEST_TEMPLATES: [&str; 4] = [
    "Could you take me to the {}?",
    "I would like to see the {}.",
    "Please guide me to the {}.",
    "Take me to the {} please",
];

pub const ACK_PHRASES: [&str; 4] = ["OK", "Okay", "Yes", "OK next"];

/// Seconds a bot waits for the guide before giving up on a request.
const REPLY_PATIENCE_S: f64 = 45.0;
/// Wander pauses are this fraction of a full dwell.
const WANDER_PAUSE_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    Pausing { until_s: f64 },
    Walking,
    Awaiting { target: String, since_s: f64, answered: bool },
    Following,
    Gone,
}

/// Lognormal parameters for a given mean and standard deviation.
pub fn lognormal_from_moments(mean: f64, std: f64) -> LogNormal<f64> {
    let sigma2 = (1.0 + (std * std) / (mean * mean)).ln();
    LogNormal::new(mean.ln() - sigma2 / 2.0, sigma2.sqrt()).expect("positive dwell moments")
}

pub struct Bot {
    id: String,
    agent_id: Option<String>,
    condition: Condition,
    persona: BotPersona,
    rng: ChaCha8Rng,
    dwell: LogNormal<f64>,
    interests: VecDeque<String>,
    route: VecDeque<String>,
    names: Vec<(String, String)>,
    mode: Mode,
    leave_at_s: f64,
}

impl Bot {
    pub fn new(
        id: &str,
        agent_id: Option<&str>,
        condition: Condition,
        persona: &BotPersona,
        world: &WorldSpec,
        seed: u64,
        entry_s: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ persona.seed.rotate_left(32));
        let mut interests: Vec<String> = if persona.interest_points.is_empty() {
            world.nav_points.iter().map(|p| p.id.clone()).collect()
        } else {
            persona.interest_points.iter().filter(|id| world.nav_point(id).is_some()).cloned().collect()
        };
        interests.shuffle(&mut rng);
        let budget = persona.exit_policy.budget_s
            * LogNormal::new(0.0, persona.exit_policy.budget_sigma.max(1e-9))
                .expect("finite sigma")
                .sample(&mut rng);
        let look_around = 2.0 + 3.0 * rng.random::<f64>();
        Self {
            id: id.to_string(),
            agent_id: agent_id.map(String::from),
            condition,
            dwell: lognormal_from_moments(persona.dwell_mean_s, persona.dwell_std_s),
            persona: persona.clone(),
            rng,
            interests: interests.into(),
            route: world.fixed_route.iter().cloned().collect(),
            names: world.nav_points.iter().map(|p| (p.id.clone(), p.name.clone())).collect(),
            mode: Mode::Pausing { until_s: entry_s + look_around },
            leave_at_s: entry_s + budget,
        }
    }

    fn pause(&mut self, now_s: f64, factor: f64) {
        let d = self.dwell.sample(&mut self.rng) * factor;
        self.mode = Mode::Pausing { until_s: now_s + d };
    }

    fn name_of(&self, id: &str) -> String {
        self.names
            .iter()
            .find(|(i, _)| i == id)
            .map_or_else(|| id.to_string(), |(_, n)| n.clone())
    }

    fn wander_target(&mut self, world: &WorldSpec, me: Position) -> Option<Position> {
        for _ in 0..16 {
            let angle = self.rng.random::<f64>() * std::f64::consts::TAU;
            let dist = self.persona.wander_step_m * (0.3 + 0.7 * self.rng.random::<f64>());
            let p = Position::new(me.x + dist * angle.cos(), me.y + dist * angle.sin());
            if !world.contains(p) {
                continue;
            }
            if let Ok(cell) = world.pos_to_cell(p) {
                if world.is_walkable(cell) {
                    return Some(p);
                }
            }
        }
        None
    }

    /// One decision step: ask the guide, wander, or leave.
    fn decide(&mut self, view: &VisitorView) -> Vec<VisitorAction> {
        let now = view.now_s;
        if now >= self.leave_at_s {
            self.mode = Mode::Gone;
            return vec![VisitorAction::Leave];
        }
        let roll: f64 = self.rng.random();
        let asks = roll < self.persona.ask_rate && self.agent_id.is_some();
        let request = match self.condition {
            Condition::OnDemand if asks => self.interests.pop_front().map(|id| {
                let tpl = REQUEST_TEMPLATES[self.rng.random_range(0..REQUEST_TEMPLATES.len())];
                (tpl.replace("{}", &self.name_of(&id).to_lowercase()), id)
            }),
            Condition::FixedRoute if asks => self.route.pop_front().map(|id| {
                let text = ACK_PHRASES[self.rng.random_range(0..ACK_PHRASES.len())];
                (text.to_string(), id)
            }),
            _ => None,
        };
        if let Some((text, target)) = request {
            self.mode = Mode::Awaiting { target: target.clone(), since_s: now, answered: false };
            return vec![VisitorAction::Say { text, request: Some(target) }];
        }
        match self.wander_target(view.world, view.me) {
            Some(p) => {
                self.mode = Mode::Walking;
                vec![VisitorAction::MoveTo(Target::Position(p))]
            }
            None => {
                self.pause(now, WANDER_PAUSE_FACTOR);
                Vec::new()
            }
        }
    }
}

impl Visitor for Bot {
    fn id(&self) -> &str {
        &self.id
    }

    fn observe(&mut self, frame: &EventFrame) {
        let now = frame.t_s;
        match &frame.event {
            Event::ChatReceived { from, text } => {
                let from_agent = self.agent_id.as_deref() == Some(from.as_str());
                if let Mode::Awaiting { answered, .. } = &mut self.mode {
                    if from_agent && text != FILLER_TEXT {
                        *answered = true;
                    }
                }
            }
            Event::DestinationReached { avatar_id } if *avatar_id == self.id => match self.mode {
                Mode::Following => {
                    self.leave_at_s += self.persona.exit_policy.engagement_bonus_s;
                    self.pause(now, 1.0);
                }
                Mode::Walking => self.pause(now, WANDER_PAUSE_FACTOR),
                _ => {}
            },
            Event::PathBlocked { avatar_id } if *avatar_id == self.id => {
                if matches!(self.mode, Mode::Walking | Mode::Following) {
                    self.pause(now, WANDER_PAUSE_FACTOR);
                }
            }
            _ => {}
        }
    }

    fn act(&mut self, view: &VisitorView) -> Vec<VisitorAction> {
        match self.mode.clone() {
            Mode::Gone | Mode::Walking | Mode::Following => Vec::new(),
            Mode::Pausing { until_s } if view.now_s < until_s => Vec::new(),
            Mode::Pausing { .. } => self.decide(view),
            Mode::Awaiting { target, answered: true, .. } => {
                self.mode = Mode::Following;
                vec![VisitorAction::MoveTo(Target::NavPoint(target))]
            }
            Mode::Awaiting { since_s, .. } => {
                if view.now_s - since_s > REPLY_PATIENCE_S {
                    self.pause(view.now_s, WANDER_PAUSE_FACTOR);
                }
                Vec::new()
            }
        }
    }

    fn on_destination(&mut self, status: PathStatus, now_s: f64) {
        if !status.feasible {
            self.pause(now_s, WANDER_PAUSE_FACTOR);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::rule_backend_decide;
    use crate::agent::{AgentAction, ObservationContext};
    use crate::protocol::{NavPointInfo, WorldHost};
    use crate::world::{bundled, load_world};

    #[test]
    fn lognormal_moments_roundtrip() {
        let d = lognormal_from_moments(20.0, 12.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 20.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn every_request_template_reaches_its_point() {
        for text in [bundled::MUSEUM, bundled::RUINA] {
            let world = load_world(text.as_bytes()).unwrap();
            let snap = WorldHost::from_world(world.clone(), 1, 0.1).snapshot();
            let ctx = ObservationContext {
                nav_points: snap.nav_points.clone(),
                ..ObservationContext::default()
            };
            for NavPointInfo { id, name, .. } in &snap.nav_points {
                for tpl in REQUEST_TEMPLATES {
                    let said = tpl.replace("{}", &name.to_lowercase());
                    let d = rule_backend_decide(&said, &ctx);
                    assert_eq!(d.action, AgentAction::Navigate { nav_point_id: id.clone() }, "{said}");
                }
            }
        }
    }
}
