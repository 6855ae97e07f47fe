//! Remote judge transport: POST a prompt, get back free text containing a
//! score.

use crate::error::{Error, Result};

/// Abstraction over the wire call so tests can fake the judge.
pub trait JudgeTransport: Send + Sync {
    /// Sends one prompt and returns the raw reply body.
    fn complete(&self, endpoint: &str, prompt: &str) -> std::result::Result<String, String>;
}

/// HTTP implementation of the judge protocol: the request body is
/// `{"prompt": <text>}` and the reply body is free text.
pub struct HttpTransport {
    agent: ureq::Agent,
    bearer_token: Option<String>,
}

impl HttpTransport {
    pub fn new(timeout: std::time::Duration) -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new()
                .timeout_read(timeout)
                .timeout_write(timeout)
                .build(),
            bearer_token: None,
        }
    }

    /// Attaches a bearer token to every request. The token is never logged
    /// or echoed in errors.
    pub fn with_bearer_token(mut self, token: Option<String>) -> Self {
        self.bearer_token = token;
        self
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(std::time::Duration::from_secs(60))
    }
}

impl JudgeTransport for HttpTransport {
    fn complete(&self, endpoint: &str, prompt: &str) -> std::result::Result<String, String> {
        let mut request = self.agent.post(endpoint);
        if let Some(token) = &self.bearer_token {
            request = request.set("Authorization", &format!("Bearer {token}"));
        }
        let response = request
            .send_json(serde_json::json!({ "prompt": prompt }))
            .map_err(|e| match e {
                // Strip the request detail: it could echo header values.
                ureq::Error::Status(code, _) => format!("judge endpoint returned HTTP {code}"),
                ureq::Error::Transport(t) => format!("transport error: {}", t.kind()),
            })?;
        response.into_string().map_err(|e| e.to_string())
    }
}

/// Extracts the first decimal number from a free-text judge reply.
pub fn parse_first_number(reply: &str) -> Result<f64> {
    let bytes = reply.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let mut start = i;
            // A directly preceding minus sign belongs to the number.
            if start > 0 && bytes[start - 1] == b'-' {
                start -= 1;
            }
            let mut end = i;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end < bytes.len()
                && bytes[end] == b'.'
                && end + 1 < bytes.len()
                && bytes[end + 1].is_ascii_digit()
            {
                end += 1;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
            }
            return reply[start..end]
                .parse::<f64>()
                .map_err(|e| Error::Remote(format!("unparseable number: {e}")));
        }
        i += 1;
    }
    Err(Error::Remote(format!(
        "no score found in judge reply: {:?}",
        truncate(reply, 120)
    )))
}

fn truncate(s: &str, limit: usize) -> &str {
    match s.char_indices().nth(limit) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}
