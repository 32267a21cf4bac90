use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::AgentConfig;
use crate::world::{bundled, load_world, WorldSpec, DEFAULT_TICK_DT_S};

pub const DEFAULT_DURATION_CAP_S: f64 = 1800.0;
pub const DEFAULT_SAMPLE_PERIOD_S: f64 = 0.5;

/// Which kind of guide (if any) the session runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Guide answers free-form requests.
    #[serde(rename = "A", alias = "A_OnDemand")]
    OnDemand,
    /// Guide walks a predetermined route, one stop per acknowledgment.
    #[serde(rename = "B", alias = "B_FixedRoute")]
    FixedRoute,
    /// No guide at all.
    #[serde(rename = "C", alias = "C_Control")]
    Control,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::OnDemand, Condition::FixedRoute, Condition::Control];

    pub fn letter(self) -> &'static str {
        match self {
            Condition::OnDemand => "A",
            Condition::FixedRoute => "B",
            Condition::Control => "C",
        }
    }

    pub fn has_agent(self) -> bool {
        self != Condition::Control
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" | "A_OnDemand" => Ok(Condition::OnDemand),
            "B" | "b" | "B_FixedRoute" => Ok(Condition::FixedRoute),
            "C" | "c" | "C_Control" => Ok(Condition::Control),
            other => Err(format!("unknown condition {other:?} (expected A, B or C)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperienceTag {
    Novice,
    Veteran,
}

/// When a bot decides to leave on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExitPolicy {
    /// Median personal time budget; each bot draws its own around it.
    pub budget_s: f64,
    /// Spread of the personal budget (lognormal sigma).
    pub budget_sigma: f64,
    /// Extra time granted each time the guide brings the bot somewhere.
    pub engagement_bonus_s: f64,
}

impl Default for ExitPolicy {
    fn default() -> Self {
        Self {
            budget_s: 300.0,
            budget_sigma: 0.25,
            engagement_bonus_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotPersona {
    pub name: String,
    pub seed: u64,
    /// Chance per decision step of asking the guide for something.
    pub ask_rate: f64,
    /// Nav point ids the bot wants to see; empty means all of them.
    pub interest_points: Vec<String>,
    pub dwell_mean_s: f64,
    pub dwell_std_s: f64,
    pub wander_step_m: f64,
    pub experience_tag: ExperienceTag,
    pub exit_policy: ExitPolicy,
}

impl Default for BotPersona {
    fn default() -> Self {
        Self {
            name: "demo".to_string(),
            seed: 0,
            ask_rate: 0.6,
            interest_points: Vec::new(),
            dwell_mean_s: 20.0,
            dwell_std_s: 12.0,
            wander_step_m: 6.0,
            experience_tag: ExperienceTag::Novice,
            exit_policy: ExitPolicy::default(),
        }
    }
}

impl BotPersona {
    pub fn tag(&self) -> String {
        let exp = match self.experience_tag {
            ExperienceTag::Novice => "novice",
            ExperienceTag::Veteran => "veteran",
        };
        format!("{}/{exp}", self.name)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(format!("persona {}: {m}", self.name)));
        if !(0.0..=1.0).contains(&self.ask_rate) {
            return bad("ask_rate must be within [0, 1]");
        }
        if !(self.dwell_mean_s > 0.0 && self.dwell_std_s > 0.0) {
            return bad("dwell_mean_s and dwell_std_s must be positive");
        }
        if !(self.wander_step_m > 0.0) {
            return bad("wander_step_m must be positive");
        }
        if !(self.exit_policy.budget_s > 0.0) || self.exit_policy.budget_sigma < 0.0 {
            return bad("exit budget must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Path to a world file, or the name of a bundled world.
    pub world: String,
    pub condition: Condition,
    pub persona: BotPersona,
    pub duration_cap_s: f64,
    pub tick_dt_s: f64,
    /// Simulated seconds per wall second. `None` runs as fast as possible.
    pub time_scale: Option<f64>,
    pub sample_period_s: f64,
    pub seed: u64,
    pub agent: AgentConfig,
    /// Simulated thinking time of the built-in backends.
    pub think_s: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            world: "museum".to_string(),
            condition: Condition::OnDemand,
            persona: BotPersona::default(),
            duration_cap_s: DEFAULT_DURATION_CAP_S,
            tick_dt_s: DEFAULT_TICK_DT_S,
            time_scale: None,
            sample_period_s: DEFAULT_SAMPLE_PERIOD_S,
            seed: 1,
            agent: AgentConfig::default(),
            think_s: 1.5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if !(self.duration_cap_s > 0.0) {
            return bad("duration_cap_s must be positive");
        }
        if !(self.tick_dt_s > 0.0) {
            return bad("tick_dt_s must be positive");
        }
        if !(self.sample_period_s >= self.tick_dt_s) {
            return bad("sample_period_s must be at least one tick");
        }
        if matches!(self.time_scale, Some(s) if !(s > 0.0)) {
            return bad("time_scale must be positive");
        }
        self.persona.validate()
    }

    /// Ticks between two trajectory samples.
    pub fn sample_every(&self) -> u64 {
        ((self.sample_period_s / self.tick_dt_s).round() as u64).max(1)
    }
}

/// Loads a world from a file path (relative to `base`) or a bundled name.
pub fn load_world_source(source: &str, base: Option<&FsPath>) -> Result<WorldSpec, HarnessError> {
    let candidate: PathBuf = match base {
        Some(b) if FsPath::new(source).is_relative() => b.join(source),
        _ => PathBuf::from(source),
    };
    let fail = |m: String| HarnessError::WorldLoad(format!("{source}: {m}"));
    if candidate.is_file() {
        let bytes = std::fs::read(&candidate).map_err(|e| fail(e.to_string()))?;
        return load_world(&bytes).map_err(|e| fail(e.to_string()));
    }
    match bundled::by_name(source) {
        Some(text) => load_world(text.as_bytes()).map_err(|e| fail(e.to_string())),
        None => Err(fail("no such file or bundled world".to_string())),
    }
}
