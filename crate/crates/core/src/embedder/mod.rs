//! Embedding providers.
//!
//! Three providers share the [`EmbeddingProvider`] contract: a seeded
//! text-hash generator, a fixture table read from `embeddings.jsonl`, and an
//! HTTP client for a generic embedding endpoint. [`synth`] generates whole
//! labelled corpora with known style, topic and language factors.

mod http;
pub mod synth;

pub use http::{
    Backoff, EmbedRequest, EmbedResponse, HttpEmbedder, ReqwestTransport, Transport,
    TransportError, MAX_CONCURRENT_REQUESTS,
};
pub use synth::{synth_generate, SynthConfig, SynthOutput, TruthRecord};

use std::collections::HashMap;
use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_sentences, estimate_tokens, read_jsonl, EmbeddingRecord, TextRecord};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::vecmath::{mean_pool, normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Synthetic,
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    pub endpoint_url: Option<String>,
    pub api_key_env: Option<String>,
    pub batch_size: usize,
    pub max_retries: usize,
    /// Value of the request's `input_type` field.
    pub input_type: String,
    /// `embeddings.jsonl` backing the fixture provider.
    pub fixture_path: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Synthetic,
            dim: 1024,
            endpoint_url: None,
            api_key_env: None,
            batch_size: 96,
            max_retries: 3,
            input_type: "clustering".into(),
            fixture_path: None,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::ConfigInvalid("embedder.dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("embedder.batch_size must be positive".into()));
        }
        match (self.provider, &self.endpoint_url) {
            (ProviderKind::Http, None) => Err(Error::ConfigInvalid(
                "embedder.endpoint_url is required for the http provider".into(),
            )),
            (ProviderKind::Synthetic | ProviderKind::Fixture, Some(_)) => Err(
                Error::ConfigInvalid("embedder.endpoint_url is only valid for the http provider".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Text to embed; `id` is only consulted by the fixture provider.
#[derive(Debug, Clone, Copy)]
pub struct EmbedInput<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// One unit-norm vector per input, in input order.
    fn embed_batch(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>>;
}

/// Maps each text to a seeded Gaussian direction. Equal text and seed give
/// equal vectors; there is no semantic structure.
#[derive(Debug, Clone)]
pub struct SyntheticEmbedder {
    dim: usize,
    seed: u64,
}

impl SyntheticEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbeddingProvider for SyntheticEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .map(|input| {
                let mut rng = rng_for(self.seed, input.text);
                let raw: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                normalize(&raw)
            })
            .collect()
    }
}

/// Looks embeddings up by record id.
#[derive(Debug, Clone)]
pub struct FixtureEmbedder {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FixtureEmbedder {
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut vectors = HashMap::with_capacity(records.len());
        for r in records {
            if r.vector.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: r.vector.len(),
                });
            }
            vectors.insert(r.id, r.vector);
        }
        Ok(Self { dim, vectors })
    }
}

impl EmbeddingProvider for FixtureEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .map(|input| {
                self.vectors
                    .get(input.id)
                    .cloned()
                    .ok_or_else(|| Error::MissingFixture(input.id.to_string()))
            })
            .collect()
    }
}

/// Builds the configured provider. `seed` drives the synthetic provider.
pub fn build_provider(cfg: &EmbedderConfig, seed: u64) -> Result<Box<dyn EmbeddingProvider>> {
    cfg.validate()?;
    Ok(match cfg.provider {
        ProviderKind::Synthetic => Box::new(SyntheticEmbedder::new(cfg.dim, seed)),
        ProviderKind::Fixture => {
            let path = cfg.fixture_path.as_ref().ok_or_else(|| {
                Error::ConfigInvalid("embedder.fixture_path is required for the fixture provider".into())
            })?;
            Box::new(FixtureEmbedder::new(cfg.dim, read_jsonl(path)?)?)
        }
        ProviderKind::Http => {
            let transport = ReqwestTransport::from_config(cfg)?;
            Box::new(HttpEmbedder::new(cfg.clone(), transport))
        }
    })
}

/// Embeds `records` in one provider call. A record over `token_budget`
/// estimated tokens is split into sentence chunks; its embedding is the
/// renormalized mean of the chunk embeddings.
pub fn embed_records(
    provider: &dyn EmbeddingProvider,
    records: &[TextRecord],
    token_budget: usize,
) -> Result<Vec<EmbeddingRecord>> {
    let mut pieces: Vec<(usize, String)> = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if estimate_tokens(&r.text, &r.language) <= token_budget {
            pieces.push((i, r.text.clone()));
        } else {
            let chunks = chunk_sentences(&r.text, &r.language, token_budget)?;
            log::debug!("record `{}` split into {} chunks", r.id, chunks.len());
            pieces.extend(chunks.into_iter().map(|c| (i, c.text)));
        }
    }
    let inputs: Vec<EmbedInput<'_>> = pieces
        .iter()
        .map(|(i, text)| EmbedInput { id: &records[*i].id, text })
        .collect();
    let vectors = provider.embed_batch(&inputs)?;
    if vectors.len() != inputs.len() {
        return Err(Error::InconsistentInput(format!(
            "provider returned {} vectors for {} inputs",
            vectors.len(),
            inputs.len()
        )));
    }
    let mut grouped: Vec<Vec<Vec<f64>>> = vec![Vec::new(); records.len()];
    for ((i, _), v) in pieces.iter().zip(vectors) {
        if v.len() != provider.dim() {
            return Err(Error::DimMismatch {
                expected: provider.dim(),
                actual: v.len(),
            });
        }
        grouped[*i].push(v);
    }
    records
        .iter()
        .zip(grouped)
        .map(|(r, vs)| {
            let vector = if vs.len() == 1 { vs.into_iter().next().unwrap() } else { normalize(&mean_pool(&vs)?)? };
            Ok(EmbeddingRecord { id: r.id.clone(), vector })
        })
        .collect()
}
