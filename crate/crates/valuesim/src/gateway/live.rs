//! Live backends speaking the common `/chat/completions` + `/embeddings`
//! HTTP dialect.
//!
//! Credentials come from the environment (`VALUESIM_API_BASE`,
//! `VALUESIM_API_KEY`) so they never appear in config files or run
//! manifests. Server-side and transport failures map to retryable errors;
//! client-side rejections (auth, bad request, content refusals) fail fast.

use std::sync::Arc;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, CompletionRequest, EmbedBackend};

pub const API_BASE_ENV: &str = "VALUESIM_API_BASE";
pub const API_KEY_ENV: &str = "VALUESIM_API_KEY";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

fn build_client() -> Result<Client> {
    Client::builder()
        .timeout(DEFAULT_TIMEOUT)
        .build()
        .map_err(|e| Error::Transport(format!("cannot build http client: {e}")))
}

fn classify_status(status: StatusCode, body: &str) -> Error {
    let snippet: String = body.chars().take(400).collect();
    if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
        Error::Transport(format!("provider returned {status}: {snippet}"))
    } else {
        Error::Provider(format!("provider returned {status}: {snippet}"))
    }
}

fn classify_transport(e: reqwest::Error) -> Error {
    Error::Transport(format!("request failed: {e}"))
}

/// Read `VALUESIM_API_BASE` and `VALUESIM_API_KEY`, erroring on absence.
pub fn credentials_from_env() -> Result<(String, String)> {
    let base = std::env::var(API_BASE_ENV)
        .map_err(|_| Error::Config(format!("{API_BASE_ENV} is not set")))?;
    let key = std::env::var(API_KEY_ENV)
        .map_err(|_| Error::Config(format!("{API_KEY_ENV} is not set")))?;
    Ok((base.trim_end_matches('/').to_string(), key))
}

/// Chat + embedding backends configured from the environment.
pub fn live_backends_from_env() -> Result<(Arc<dyn ChatBackend>, Arc<dyn EmbedBackend>)> {
    let (base, key) = credentials_from_env()?;
    Ok((
        Arc::new(LiveChat::new(base.clone(), key.clone())?),
        Arc::new(LiveEmbed::new(base, key)?),
    ))
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatPayload<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

pub struct LiveChat {
    base: String,
    api_key: String,
    client: Client,
}

impl LiveChat {
    pub fn new(base: String, api_key: String) -> Result<LiveChat> {
        Ok(LiveChat {
            base: base.trim_end_matches('/').to_string(),
            api_key,
            client: build_client()?,
        })
    }
}

impl ChatBackend for LiveChat {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let payload = ChatPayload {
            model: &request.model,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base))
            .bearer_auth(&self.api_key)
            .json(&payload)
            .send()
            .map_err(classify_transport)?;
        let status = response.status();
        let body = response.text().map_err(classify_transport)?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        let parsed: ChatResponse = serde_json::from_str(&body)
            .map_err(|e| Error::Provider(format!("malformed completion response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Provider("completion response has no choices".to_string()))?;
        Ok(choice.message.content)
    }
}

#[derive(Serialize)]
struct EmbedPayload<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

pub struct LiveEmbed {
    base: String,
    api_key: String,
    client: Client,
}

impl LiveEmbed {
    pub fn new(base: String, api_key: String) -> Result<LiveEmbed> {
        Ok(LiveEmbed {
            base: base.trim_end_matches('/').to_string(),
            api_key,
            client: build_client()?,
        })
    }
}

impl EmbedBackend for LiveEmbed {
    fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>> {
        let payload = EmbedPayload {
            model,
            input: [text],
        };
        let response = self
            .client
            .post(format!("{}/embeddings", self.base))
            .bearer_auth(&self.api_key)
            .json(&payload)
            .send()
            .map_err(classify_transport)?;
        let status = response.status();
        let body = response.text().map_err(classify_transport)?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        let parsed: EmbedResponse = serde_json::from_str(&body)
            .map_err(|e| Error::Provider(format!("malformed embedding response: {e}")))?;
        let datum = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| Error::Provider("embedding response has no data".to_string()))?;
        if datum.embedding.is_empty() {
            return Err(Error::Provider("embedding response is empty".to_string()));
        }
        Ok(datum.embedding)
    }
}
