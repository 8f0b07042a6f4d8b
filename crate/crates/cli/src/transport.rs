//! Blocking HTTP transport for live completion backends.

use std::time::Duration;

use boxlab::llm_backend::{BackendError, Transport};

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str, timeout: Duration) -> Result<(u16, String), BackendError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_owned());
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok((status, text))
    }
}
