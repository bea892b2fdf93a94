//! Dialogue clients.
//!
//! Wire format, shared by the in-process stub and the HTTP adapter:
//! request `{"prompt": "...", "query": "...", "seed": 7}`, response
//! `{"text": "..."}`.
//!
//! The prompt is the three-line context block followed by one legend line
//! per labelled memory (`M1: <text>`) and one line per tension directive.
//! Daily summaries send the summary prompt from [`crate::lifecycle`] with
//! an empty query.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lifecycle::SUMMARY_TASK;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRequest {
    pub prompt: String,
    pub query: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueReply {
    pub text: String,
}

#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct DialogueFailure(pub String);

pub trait DialogueClient: Send + Sync {
    fn complete(&self, request: &DialogueRequest) -> Result<DialogueReply, DialogueFailure>;
}

const DIRECTIVE_PREFIX: &str = "Express uncertainty about [";

/// Deterministic client: summaries become `I remember: <texts>`, replies
/// echo the top memory and open with `My memory blurs about <topic>...`
/// when the prompt carries a tension directive.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubClient;

impl StubClient {
    fn legend(prompt: &str) -> Vec<&str> {
        prompt
            .lines()
            .filter_map(|l| {
                let rest = l.strip_prefix('M')?;
                let (num, text) = rest.split_once(": ")?;
                num.chars().all(|c| c.is_ascii_digit()).then_some(text)
            })
            .collect()
    }

    fn topics(prompt: &str) -> Vec<&str> {
        prompt
            .lines()
            .filter_map(|l| l.strip_prefix(DIRECTIVE_PREFIX)?.strip_suffix(']'))
            .collect()
    }
}

impl DialogueClient for StubClient {
    fn complete(&self, request: &DialogueRequest) -> Result<DialogueReply, DialogueFailure> {
        let legend = Self::legend(&request.prompt);
        if request.prompt.lines().any(|l| l == SUMMARY_TASK) {
            return Ok(DialogueReply {
                text: format!("I remember: {}", legend.join("; ")),
            });
        }
        let echo = legend.first().copied().unwrap_or("I am still listening.");
        let topics = Self::topics(&request.prompt);
        let text = if topics.is_empty() {
            echo.to_string()
        } else {
            format!("My memory blurs about {}... {echo}", topics.join(" and "))
        };
        Ok(DialogueReply { text })
    }
}

/// Client that always fails; used to exercise error paths.
#[derive(Debug, Clone, Default)]
pub struct FailingClient {
    pub message: String,
}

impl DialogueClient for FailingClient {
    fn complete(&self, _request: &DialogueRequest) -> Result<DialogueReply, DialogueFailure> {
        Err(DialogueFailure(if self.message.is_empty() {
            "dialogue client unavailable".into()
        } else {
            self.message.clone()
        }))
    }
}

/// Adapter for an external chat-completion service speaking the wire format
/// above over HTTP POST.
#[derive(Debug, Clone)]
pub struct HttpDialogueClient {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpDialogueClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, DialogueFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| DialogueFailure(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            client,
        })
    }
}

impl DialogueClient for HttpDialogueClient {
    fn complete(&self, request: &DialogueRequest) -> Result<DialogueReply, DialogueFailure> {
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(|e| DialogueFailure(format!("request failed: {e}")))?;
        if !response.status().is_success() {
            return Err(DialogueFailure(format!("upstream status {}", response.status())));
        }
        response
            .json::<DialogueReply>()
            .map_err(|e| DialogueFailure(format!("bad upstream body: {e}")))
    }
}
