use std::time::Duration;

use serde_json::json;

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub endpoint: String,
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    pub fn retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network(_) => true,
            TransportError::Malformed(_) => false,
        }
    }
}

/// Sends one chat-completion request.
pub trait Transport: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError>;
}

/// OpenAI-compatible `chat/completions` over HTTP.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(req.timeout)).http_status_as_error(false).build().into();
        let body = json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut builder = agent.post(&req.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &req.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = builder.send(body.to_string()).map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Network(e.to_string()))?;
        if status != 200 {
            return Err(TransportError::Status { status, body: text.chars().take(500).collect() });
        }
        parse_chat_response(&text)
    }
}

pub fn parse_chat_response(body: &str) -> Result<ChatResponse, TransportError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    let text =
        v["choices"][0]["message"]["content"].as_str().ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))?.to_string();
    Ok(ChatResponse {
        text,
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    })
}
