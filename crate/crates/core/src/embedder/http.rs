use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EmbedInput, EmbedderConfig, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::vecmath::normalize;

/// Upper bound on in-flight requests per `embed_batch` call.
pub const MAX_CONCURRENT_REQUESTS: usize = 4;

/// Request body: `{"texts": [...], "input_type": "clustering"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    pub input_type: String,
}

/// Response body: `{"embeddings": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx.
    Transient(String),
    Auth(String),
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn post(&self, request: &EmbedRequest) -> std::result::Result<EmbedResponse, TransportError>;
}

/// Exponential backoff: `base * 2^attempt`, scaled by a jitter factor in
/// `[0.5, 1.5)`.
#[derive(Clone)]
pub struct Backoff {
    pub base: Duration,
    sleeper: Arc<dyn Fn(Duration) + Send + Sync>,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            sleeper: Arc::new(std::thread::sleep),
        }
    }
}

impl Backoff {
    /// Uses `sleeper` instead of blocking the thread.
    pub fn with_sleeper(sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        Self {
            sleeper: Arc::new(sleeper),
            ..Self::default()
        }
    }

    pub fn delay(&self, batch: usize, attempt: usize) -> Duration {
        let jitter: f64 = rng_for(batch as u64, &format!("backoff-{attempt}")).random_range(0.5..1.5);
        self.base.mul_f64(2f64.powi(attempt as i32) * jitter)
    }
}

pub struct HttpEmbedder<T> {
    cfg: EmbedderConfig,
    transport: T,
    backoff: Backoff,
    attempts: AtomicUsize,
}

impl<T: Transport> HttpEmbedder<T> {
    pub fn new(cfg: EmbedderConfig, transport: T) -> Self {
        Self::with_backoff(cfg, transport, Backoff::default())
    }

    pub fn with_backoff(cfg: EmbedderConfig, transport: T, backoff: Backoff) -> Self {
        Self {
            cfg,
            transport,
            backoff,
            attempts: AtomicUsize::new(0),
        }
    }

    /// Total requests issued so far, including retries.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn send_with_retry(&self, batch_index: usize, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let request = EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
            input_type: self.cfg.input_type.clone(),
        };
        let mut attempt = 0;
        loop {
            self.attempts.fetch_add(1, Ordering::SeqCst);
            match self.transport.post(&request) {
                Ok(response) => return self.check_response(texts.len(), response),
                Err(TransportError::Auth(msg)) => return Err(Error::AuthError(msg)),
                Err(TransportError::Fatal(msg)) => {
                    return Err(Error::ProviderUnavailable {
                        attempts: attempt + 1,
                        message: msg,
                    })
                }
                Err(TransportError::Transient(msg)) => {
                    if attempt >= self.cfg.max_retries {
                        return Err(Error::ProviderUnavailable {
                            attempts: attempt + 1,
                            message: msg,
                        });
                    }
                    log::warn!("embedding request failed ({msg}); retrying");
                    (self.backoff.sleeper)(self.backoff.delay(batch_index, attempt));
                    attempt += 1;
                }
            }
        }
    }

    fn check_response(&self, expected: usize, response: EmbedResponse) -> Result<Vec<Vec<f64>>> {
        if response.embeddings.len() != expected {
            return Err(Error::ProviderUnavailable {
                attempts: 1,
                message: format!(
                    "provider returned {} embeddings for {expected} texts",
                    response.embeddings.len()
                ),
            });
        }
        response
            .embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.cfg.dim {
                    return Err(Error::DimMismatch {
                        expected: self.cfg.dim,
                        actual: v.len(),
                    });
                }
                crate::vecmath::check_finite(&v)?;
                normalize(&v)
            })
            .collect()
    }
}

impl<T: Transport> EmbeddingProvider for HttpEmbedder<T> {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_batch(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>> {
        let texts: Vec<&str> = inputs.iter().map(|i| i.text).collect();
        let batches: Vec<&[&str]> = texts.chunks(self.cfg.batch_size).collect();
        let mut out = Vec::with_capacity(inputs.len());
        for (wave_index, wave) in batches.chunks(MAX_CONCURRENT_REQUESTS).enumerate() {
            let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .enumerate()
                    .map(|(i, batch)| {
                        let index = wave_index * MAX_CONCURRENT_REQUESTS + i;
                        scope.spawn(move || self.send_with_retry(index, batch))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

/// Blocking HTTP transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl ReqwestTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::ConfigInvalid(format!("http client: {e}")))?;
        Ok(Self {
            client,
            url: url.into(),
            api_key,
        })
    }

    /// Reads the API key from the environment variable named in the config.
    pub fn from_config(cfg: &EmbedderConfig) -> Result<Self> {
        let url = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| Error::ConfigInvalid("missing embedder.endpoint_url".into()))?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::AuthError(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        Self::new(url, api_key)
    }
}

impl Transport for ReqwestTransport {
    fn post(&self, request: &EmbedRequest) -> std::result::Result<EmbedResponse, TransportError> {
        let mut builder = self.client.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(TransportError::Auth(format!("HTTP {status}")));
        }
        if status.is_server_error()
            || status == reqwest::StatusCode::TOO_MANY_REQUESTS
            || status == reqwest::StatusCode::REQUEST_TIMEOUT
        {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        response
            .json::<EmbedResponse>()
            .map_err(|e| TransportError::Fatal(format!("bad response body: {e}")))
    }
}
