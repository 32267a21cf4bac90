//! Decision backend that forwards each utterance to an HTTP service.
//!
//! The service receives `{prompt, utterance, observation}` and answers
//! with a decision object `{reply, action?, delay_s?}`.

use std::path::Path;
use std::time::Duration;

use pixie_core::agent::{Decision, DecisionBackend, Intent, ObservationContext};
use serde_json::json;

use crate::DriverError;

pub struct ExternalBackend {
    url: String,
    prompt: String,
    http: reqwest::blocking::Client,
}

const UNAVAILABLE_REPLY: &str = "Sorry, I cannot think clearly right now. Please ask me again.";

impl ExternalBackend {
    pub fn new(url: impl Into<String>, prompt: impl Into<String>, timeout: Duration) -> Result<Self, DriverError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| DriverError::Payload(e.to_string()))?;
        Ok(Self { url: url.into(), prompt: prompt.into(), http })
    }

    pub fn from_prompt_file(url: &str, prompt_file: &Path, timeout: Duration) -> Result<Self, DriverError> {
        let prompt = std::fs::read_to_string(prompt_file)
            .map_err(|e| DriverError::Payload(format!("{}: {e}", prompt_file.display())))?;
        Self::new(url, prompt, timeout)
    }

    fn call(&self, utterance: &str, ctx: &ObservationContext) -> Result<Decision, reqwest::Error> {
        let body = json!({ "prompt": self.prompt, "utterance": utterance, "observation": ctx });
        self.http.post(&self.url).json(&body).send()?.error_for_status()?.json()
    }
}

impl DecisionBackend for ExternalBackend {
    fn understand(&mut self, utterance: &str, _ctx: &ObservationContext) -> Intent {
        Intent::parse(utterance)
    }

    fn decide(&mut self, intent: &Intent, ctx: &ObservationContext) -> Decision {
        self.call(&intent.utterance, ctx).unwrap_or_else(|_| Decision::say(UNAVAILABLE_REPLY))
    }
}
