//! HTTP JSON clients for remote backends.
//!
//! Wire protocol (UTF-8 JSON bodies, `POST`):
//!
//! | endpoint       | request                    | response                             |
//! |----------------|----------------------------|--------------------------------------|
//! | `/generate`    | `{prompt, seed, steps}`    | `{image_id, features?}`              |
//! | `/score`       | `{prompt, image_id}`       | `{overall, similarity, aesthetic}`   |
//! | `/similarity`  | `{text_a, text_b}`         | `{similarity}`                       |
//! | `/reformulate` | `{input}`                  | `{output}`                           |
//!
//! The reformulate endpoint receives the rendered meta-prompt as `input`.

use std::thread;
use std::time::Duration;

use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::capability::{render_meta_prompt, CapabilityCondition, QualityScores};
use crate::error::{CaprError, Result};

use super::{GeneratorBackend, ImageRef, ReformulatorBackend, ScorerBackend, TextSimilarity};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct GenerateRequest {
    pub prompt: String,
    pub seed: u64,
    pub steps: u32,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreRequest {
    pub prompt: String,
    pub image_id: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SimilarityRequest {
    pub text_a: String,
    pub text_b: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SimilarityResponse {
    pub similarity: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReformulateRequest {
    pub input: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReformulateResponse {
    pub output: String,
}

enum Attempt {
    Transient(String, Option<u16>),
    Fatal(CaprError),
}

/// Blocking JSON client with bounded retries and exponential backoff.
///
/// Cloning shares the underlying connection pool.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    http: reqwest::blocking::Client,
    max_attempts: u32,
    backoff: Duration,
}

impl RemoteClient {
    pub fn new(timeout: Duration, max_attempts: u32, backoff: Duration) -> Result<Self> {
        if max_attempts == 0 {
            return Err(CaprError::invalid("retries must be at least 1"));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| CaprError::Backend {
                endpoint: "<client>".into(),
                message: e.to_string(),
            })?;
        Ok(Self {
            http,
            max_attempts,
            backoff,
        })
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        request: &Req,
    ) -> std::result::Result<Resp, Attempt> {
        let resp = self
            .http
            .post(endpoint)
            .json(request)
            .send()
            .map_err(|e| Attempt::Transient(e.to_string(), None))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Transient(format!("HTTP {status}"), Some(status.as_u16())));
        }
        if status.as_u16() != 200 {
            return Err(Attempt::Fatal(CaprError::HttpStatus {
                endpoint: endpoint.to_string(),
                status: status.as_u16(),
                attempts: 1,
            }));
        }
        let body = resp
            .bytes()
            .map_err(|e| Attempt::Transient(e.to_string(), None))?;
        serde_json::from_slice(&body).map_err(|e| {
            Attempt::Fatal(CaprError::Decode {
                endpoint: endpoint.to_string(),
                message: e.to_string(),
            })
        })
    }

    /// POST `request` to `endpoint` and decode the JSON response.
    ///
    /// Connection failures, 5xx and 429 are retried; other statuses and
    /// undecodable bodies fail immediately.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        request: &Req,
    ) -> Result<Resp> {
        let mut last = (String::new(), None);
        for attempt in 1..=self.max_attempts {
            match self.attempt(endpoint, request) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(CaprError::HttpStatus { endpoint, status, .. })) => {
                    return Err(CaprError::HttpStatus {
                        endpoint,
                        status,
                        attempts: attempt,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg, status)) => {
                    warn!("{endpoint}: attempt {attempt}/{} failed: {msg}", self.max_attempts);
                    last = (msg, status);
                    if attempt < self.max_attempts {
                        thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
                    }
                }
            }
        }
        Err(match last {
            (_, Some(status)) => CaprError::HttpStatus {
                endpoint: endpoint.to_string(),
                status,
                attempts: self.max_attempts,
            },
            (message, None) => CaprError::Backend {
                endpoint: endpoint.to_string(),
                message,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    client: RemoteClient,
    endpoint: String,
}

impl RemoteGenerator {
    pub fn new(client: RemoteClient, endpoint: String) -> Self {
        Self { client, endpoint }
    }
}

impl GeneratorBackend for RemoteGenerator {
    fn generate(&self, prompt: &str, seed: u64, steps: u32) -> Result<ImageRef> {
        let req = GenerateRequest {
            prompt: prompt.to_string(),
            seed,
            steps,
        };
        self.client.call(&self.endpoint, &req)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: RemoteClient,
    endpoint: String,
}

impl RemoteScorer {
    pub fn new(client: RemoteClient, endpoint: String) -> Self {
        Self { client, endpoint }
    }
}

impl ScorerBackend for RemoteScorer {
    fn score(&self, prompt: &str, image: &ImageRef) -> Result<QualityScores> {
        let req = ScoreRequest {
            prompt: prompt.to_string(),
            image_id: image.image_id.clone(),
        };
        let scores: QualityScores = self.client.call(&self.endpoint, &req)?;
        scores.validate().map_err(|e| CaprError::Decode {
            endpoint: self.endpoint.clone(),
            message: e.to_string(),
        })?;
        Ok(scores)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteSimilarity {
    client: RemoteClient,
    endpoint: String,
}

impl RemoteSimilarity {
    pub fn new(client: RemoteClient, endpoint: String) -> Self {
        Self { client, endpoint }
    }
}

impl TextSimilarity for RemoteSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let req = SimilarityRequest {
            text_a: a.to_string(),
            text_b: b.to_string(),
        };
        let resp: SimilarityResponse = self.client.call(&self.endpoint, &req)?;
        if !(0.0..=1.0).contains(&resp.similarity) {
            return Err(CaprError::Decode {
                endpoint: self.endpoint.clone(),
                message: format!("similarity {} outside [0, 1]", resp.similarity),
            });
        }
        Ok(resp.similarity)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteReformulator {
    client: RemoteClient,
    endpoint: String,
}

impl RemoteReformulator {
    pub fn new(client: RemoteClient, endpoint: String) -> Self {
        Self { client, endpoint }
    }
}

impl ReformulatorBackend for RemoteReformulator {
    fn reformulate(&self, prompt: &str, condition: &CapabilityCondition) -> Result<String> {
        let req = ReformulateRequest {
            input: render_meta_prompt(prompt, condition),
        };
        let resp: ReformulateResponse = self.client.call(&self.endpoint, &req)?;
        if resp.output.trim().is_empty() {
            return Err(CaprError::Decode {
                endpoint: self.endpoint.clone(),
                message: "empty reformulation".into(),
            });
        }
        Ok(resp.output)
    }
}
