//! Decision backends.
//!
//! Every backend follows the same two-phase contract: `understand` turns a
//! raw utterance into an [`Intent`], `decide` turns the intent into a reply
//! and an optional action. Both phases are total.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::observation::ObservationContext;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum AgentAction {
    #[default]
    None,
    Navigate {
        nav_point_id: String,
    },
    Emote {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub utterance: String,
    pub normalized: String,
    pub tokens: Vec<String>,
}

impl Intent {
    pub fn parse(utterance: &str) -> Self {
        let normalized = normalize(utterance);
        let tokens = normalized.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
        Self {
            utterance: utterance.to_string(),
            normalized,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub reply: String,
    #[serde(default)]
    pub action: AgentAction,
    /// Simulated thinking time before the decision becomes available.
    #[serde(default)]
    pub delay_s: f64,
}

impl Decision {
    pub fn say(reply: impl Into<String>) -> Self {
        Self {
            reply: reply.into(),
            action: AgentAction::None,
            delay_s: 0.0,
        }
    }

    pub fn navigate(reply: impl Into<String>, nav_point_id: impl Into<String>) -> Self {
        Self {
            reply: reply.into(),
            action: AgentAction::Navigate {
                nav_point_id: nav_point_id.into(),
            },
            delay_s: 0.0,
        }
    }
}

pub trait DecisionBackend: Send {
    fn understand(&mut self, utterance: &str, ctx: &ObservationContext) -> Intent;

    fn decide(&mut self, intent: &Intent, ctx: &ObservationContext) -> Decision;

    fn respond(&mut self, utterance: &str, ctx: &ObservationContext) -> Decision {
        let intent = self.understand(utterance, ctx);
        self.decide(&intent, ctx)
    }
}

/// Lowercases, drops punctuation and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(String::from).collect()
}

const INTERROGATIVES: [&str; 9] =
    ["what", "where", "which", "who", "how", "why", "tell", "explain", "describe"];

pub fn clarification(ctx: &ObservationContext) -> String {
    let names: Vec<&str> = ctx.nav_points.iter().map(|p| p.name.as_str()).collect();
    format!(
        "I'm not sure where you would like to go. I can take you to: {}.",
        names.join(", ")
    )
}

fn decide_by_rules(intent: &Intent, ctx: &ObservationContext) -> Decision {
    let text = &intent.normalized;
    let mut best_match: Option<(usize, usize)> = None;
    let mut best_partial: Option<(usize, usize)> = None;
    for (i, p) in ctx.nav_points.iter().enumerate() {
        let name_tokens = tokens(&p.name);
        let hits = name_tokens.iter().filter(|t| text.contains(t.as_str())).count();
        let full_name = !name_tokens.is_empty() && hits == name_tokens.len();
        let desc_tokens = tokens(&p.description);
        let full_desc =
            !desc_tokens.is_empty() && desc_tokens.iter().all(|t| text.contains(t.as_str()));
        // strict `>` keeps the earliest point on ties
        if (full_name || full_desc) && best_match.is_none_or(|(_, h)| hits > h) {
            best_match = Some((i, hits));
        }
        if hits > 0 && best_partial.is_none_or(|(_, h)| hits > h) {
            best_partial = Some((i, hits));
        }
    }

    if let Some((i, _)) = best_match {
        let p = &ctx.nav_points[i];
        return Decision::navigate(format!("Heading to {}. {}", p.name, p.description), &p.id);
    }
    let asks = intent.utterance.contains('?')
        || intent.tokens.iter().any(|t| INTERROGATIVES.contains(&t.as_str()));
    if let (true, Some((i, _))) = (asks, best_partial) {
        let p = &ctx.nav_points[i];
        return Decision::say(format!("{}: {}", p.name, p.description));
    }
    Decision::say(clarification(ctx))
}

/// Deterministic keyword matcher over nav point names and descriptions.
pub fn rule_backend_decide(utterance: &str, ctx: &ObservationContext) -> Decision {
    decide_by_rules(&Intent::parse(utterance), ctx)
}

/// Rule-based stand-in for a language model. `think_s` is added as
/// simulated latency to every decision.
#[derive(Debug, Clone, Default)]
pub struct RuleBackend {
    pub think_s: f64,
}

impl RuleBackend {
    pub fn new(think_s: f64) -> Self {
        Self { think_s }
    }
}

impl DecisionBackend for RuleBackend {
    fn understand(&mut self, utterance: &str, _ctx: &ObservationContext) -> Intent {
        Intent::parse(utterance)
    }

    fn decide(&mut self, intent: &Intent, ctx: &ObservationContext) -> Decision {
        Decision {
            delay_s: self.think_s,
            ..decide_by_rules(intent, ctx)
        }
    }
}

pub const ACK_TOKENS: [&str; 5] = ["ok", "okay", "yes", "next", "go"];
pub const ROUTE_PROMPT_REPLY: &str = "Please say OK to continue the tour.";
pub const ROUTE_DONE_REPLY: &str =
    "That was the last stop of the tour. Feel free to explore on your own!";

/// Position along a fixed route: index of the next stop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteState {
    pub next: usize,
}

impl RouteState {
    pub fn exhausted(&self, route: &[String]) -> bool {
        self.next >= route.len()
    }
}

pub fn is_acknowledgment(utterance: &str) -> bool {
    let toks = tokens(utterance);
    !toks.is_empty() && toks.iter().all(|t| ACK_TOKENS.contains(&t.as_str()))
}

/// Advances along `route` when the user acknowledges.
pub fn fixed_route_decide(
    utterance: &str,
    route: &[String],
    state: &mut RouteState,
    ctx: &ObservationContext,
) -> Decision {
    let ack = is_acknowledgment(utterance);
    if state.exhausted(route) {
        return Decision::say(ROUTE_DONE_REPLY);
    }
    if !ack {
        return Decision::say(ROUTE_PROMPT_REPLY);
    }
    let id = &route[state.next];
    state.next += 1;
    match ctx.nav_point(id) {
        Some(p) => Decision::navigate(format!("Next stop: {}. {}", p.name, p.description), id),
        None => Decision::navigate("Next stop.", id),
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixedRouteBackend {
    pub route: Vec<String>,
    pub state: RouteState,
    pub think_s: f64,
}

impl FixedRouteBackend {
    pub fn new(route: Vec<String>, think_s: f64) -> Self {
        Self {
            route,
            state: RouteState::default(),
            think_s,
        }
    }
}

impl DecisionBackend for FixedRouteBackend {
    fn understand(&mut self, utterance: &str, _ctx: &ObservationContext) -> Intent {
        Intent::parse(utterance)
    }

    fn decide(&mut self, intent: &Intent, ctx: &ObservationContext) -> Decision {
        Decision {
            delay_s: self.think_s,
            ..fixed_route_decide(&intent.utterance, &self.route, &mut self.state, ctx)
        }
    }
}

pub const SCRIPT_EXHAUSTED_REPLY: &str = "I have nothing more to add right now.";

/// Replays a fixed list of decisions, one per user turn.
#[derive(Debug, Clone, Default)]
pub struct ScriptBackend {
    replies: VecDeque<Decision>,
}

impl ScriptBackend {
    pub fn new(replies: impl IntoIterator<Item = Decision>) -> Self {
        Self {
            replies: replies.into_iter().collect(),
        }
    }
}

impl DecisionBackend for ScriptBackend {
    fn understand(&mut self, utterance: &str, _ctx: &ObservationContext) -> Intent {
        Intent::parse(utterance)
    }

    fn decide(&mut self, _intent: &Intent, _ctx: &ObservationContext) -> Decision {
        self.replies
            .pop_front()
            .unwrap_or_else(|| Decision::say(SCRIPT_EXHAUSTED_REPLY))
    }
}
