//! HTTP chat-completions client.
//!
//! Talks to an OpenAI-compatible endpoint, instructs the model to emit a
//! single JSON value, and rejects anything else as malformed. Transport
//! failures retry with exponential backoff; a malformed response is retried
//! once with a repair instruction appended.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::prompts::{render, PromptTemplates, SYSTEM_PROMPT};
use super::{
    validate_general, validate_specific, validate_synonyms, BackendConfig, BackendError,
    GeneralTopicRequest, SourceKind, SpecificTopicRequest, SynonymGroupRequest, TopicBackend,
};
use crate::label;

const BACKOFF_BASE: Duration = Duration::from_secs(1);

const REPAIR_INSTRUCTION: &str = "\n\nYour previous reply was not a single valid JSON value of \
the requested shape. Reply again with only the JSON value.";

/// Counting semaphore bounding in-flight requests.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(max: usize) -> Self {
        Self { slots: Mutex::new(max), freed: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut slots = self.slots.lock().expect("gate poisoned");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate poisoned");
        }
        *slots -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.gate.slots.lock().expect("gate poisoned");
        *slots += 1;
        self.gate.freed.notify_one();
    }
}

pub struct HttpBackend {
    config: BackendConfig,
    templates: PromptTemplates,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let templates = match &config.prompt_dir {
            Some(dir) => PromptTemplates::load_dir(dir)?,
            None => PromptTemplates::default(),
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Unavailable { attempts: 0, message: e.to_string() })?;
        let gate = Gate::new(config.max_parallel);
        Ok(Self { config, templates, client, gate })
    }

    fn api_key(&self) -> Result<String, BackendError> {
        std::env::var(&self.config.api_key_env)
            .map_err(|_| BackendError::MissingApiKey(self.config.api_key_env.clone()))
    }

    /// One round trip with transport retries; returns the assistant text.
    fn post_chat(&self, user_prompt: &str) -> Result<String, BackendError> {
        let key = self.api_key()?;
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user_prompt},
            ],
        });
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            let _slot = self.gate.acquire();
            let sent = self
                .client
                .post(&self.config.endpoint)
                .bearer_auth(&key)
                .json(&body)
                .send();
            match sent {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp.json().map_err(|e| {
                            BackendError::MalformedResponse(format!("response envelope: {e}"))
                        })?;
                        return parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| {
                                BackendError::MalformedResponse("no choices in response".into())
                            });
                    }
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    let text = resp.text().unwrap_or_default();
                    last_error = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
                    if !retryable {
                        return Err(BackendError::Unavailable {
                            attempts: attempt + 1,
                            message: last_error,
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Unavailable { attempts, message: last_error })
    }

    /// Fetch and parse a JSON value, retrying a malformed reply once with a
    /// repair instruction.
    fn json_call(&self, user_prompt: &str) -> Result<Value, BackendError> {
        let content = self.post_chat(user_prompt)?;
        match parse_json_content(&content) {
            Ok(value) => Ok(value),
            Err(_) => {
                let repaired = format!("{user_prompt}{REPAIR_INSTRUCTION}");
                let content = self.post_chat(&repaired)?;
                parse_json_content(&content)
            }
        }
    }
}

/// Parse the assistant text as one JSON value, tolerating code fences.
pub(super) fn parse_json_content(content: &str) -> Result<Value, BackendError> {
    let trimmed = content.trim();
    let inner = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .map(str::trim)
        .unwrap_or(trimmed);
    serde_json::from_str(inner)
        .map_err(|e| BackendError::MalformedResponse(format!("{e}: {inner:.120}")))
}

fn as_string_array(value: Value) -> Result<Vec<String>, BackendError> {
    match value {
        Value::Array(items) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(BackendError::MalformedResponse(format!(
                    "expected string, got {other}"
                ))),
            })
            .collect(),
        other => Err(BackendError::MalformedResponse(format!("expected array, got {other}"))),
    }
}

impl TopicBackend for HttpBackend {
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
        validate_general(req)?;
        let prompt = render(
            &self.templates.general,
            &[
                ("type_path", req.type_path.join(" > ")),
                ("title", req.item_title.clone()),
                ("description", req.description.clone().unwrap_or_else(|| "(none)".into())),
                ("current_tree", if req.current_tree.is_empty() {
                    "(none yet)".to_string()
                } else {
                    req.current_tree.join("; ")
                }),
            ],
        );
        match self.json_call(&prompt)? {
            Value::String(s) => label::normalize(&s).ok_or_else(|| {
                BackendError::MalformedResponse("empty subtype label".into())
            }),
            other => Err(BackendError::MalformedResponse(format!("expected string, got {other}"))),
        }
    }

    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError> {
        validate_specific(req)?;
        let source = match req.source_kind {
            SourceKind::Description => "description",
            SourceKind::Review => "review",
        };
        let prompt = render(
            &self.templates.specific,
            &[
                ("max_words", self.config.max_words.to_string()),
                ("source_kind", source.to_string()),
                ("text", req.text.clone()),
            ],
        );
        let raw = as_string_array(self.json_call(&prompt)?)?;
        let mut seen = std::collections::HashSet::new();
        Ok(raw
            .into_iter()
            .filter_map(|s| label::normalize_folded(&s))
            .filter(|s| seen.insert(s.clone()))
            .take(self.config.max_words)
            .collect())
    }

    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
        validate_synonyms(req)?;
        let listing = req
            .words
            .iter()
            .map(|(label, freq)| format!("- {label} (frequency {freq})"))
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = render(&self.templates.synonyms, &[("words", listing)]);
        match self.json_call(&prompt)? {
            Value::Array(groups) => groups
                .into_iter()
                .map(|g| {
                    as_string_array(g).map(|labels| {
                        labels.into_iter().filter_map(|s| label::normalize_folded(&s)).collect()
                    })
                })
                .collect(),
            other => Err(BackendError::MalformedResponse(format!("expected array, got {other}"))),
        }
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }
}
