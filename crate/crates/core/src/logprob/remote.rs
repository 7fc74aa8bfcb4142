use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LogProbSource, ModelRole, ScoreRequest};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    response: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    logprobs: Vec<f64>,
}

/// Scores responses over HTTP: `POST {"prompt","response"}` to one endpoint
/// per role, answered by `{"logprobs":[...]}` covering response tokens only.
pub struct RemoteBackend {
    policy_url: String,
    reference_url: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(policy_url: impl Into<String>, reference_url: impl Into<String>) -> Result<Self> {
        Self::with_timeout(policy_url, reference_url, Duration::from_secs(120))
    }

    pub fn with_timeout(
        policy_url: impl Into<String>,
        reference_url: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteBackend {
            policy_url: policy_url.into(),
            reference_url: reference_url.into(),
            client,
        })
    }

    fn url(&self, role: ModelRole) -> &str {
        match role {
            ModelRole::Policy => &self.policy_url,
            ModelRole::Reference => &self.reference_url,
        }
    }
}

impl LogProbSource for RemoteBackend {
    fn score_response(&self, request: &ScoreRequest<'_>, role: ModelRole) -> Result<Vec<f64>> {
        let url = self.url(role);
        let unavailable = |e: reqwest::Error| Error::SourceUnavailable(format!("{url}: {e}"));
        let response = self
            .client
            .post(url)
            .json(&WireRequest {
                prompt: request.prompt,
                response: request.response,
            })
            .send()
            .map_err(unavailable)?
            .error_for_status()
            .map_err(unavailable)?;
        let body: WireResponse = response.json().map_err(unavailable)?;
        Ok(body.logprobs)
    }

    fn fingerprint(&self) -> String {
        format!("remote:{},{}", self.policy_url, self.reference_url)
    }
}
