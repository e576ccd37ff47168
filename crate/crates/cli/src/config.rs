use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use styleprint_core::augment::AugmentConfig;
use styleprint_core::cluster::ClusterConfig;
use styleprint_core::corpus::DEFAULT_TOKEN_BUDGET;
use styleprint_core::embedder::{EmbedderConfig, SynthConfig};
use styleprint_core::forest::ForestConfig;
use styleprint_core::pairs::SplitConfig;
use styleprint_core::profile::{ProfileConfig, POOLED};
use styleprint_core::siamese::TrainConfig;

use crate::error::CliError;

/// Whole-pipeline configuration. Each section is optional in the file and
/// falls back to the module defaults. Per-section `seed` fields are replaced
/// by substreams of the root `seed` when a stage runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub embedder: EmbedderConfig,
    pub corpus: CorpusConfig,
    pub cluster: ClusterConfig,
    pub augment: AugmentConfig,
    pub pairs: SplitConfig,
    pub siamese: TrainConfig,
    pub forest: ForestConfig,
    pub profile: ProfileConfig,
    pub rank: RankConfig,
    /// Artifact paths by role. Roles not listed here live in the output
    /// directory under their default file names.
    pub inputs: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub token_budget: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    /// Profile owner; defaults to the first speaker in `profiles.jsonl`.
    pub speaker: Option<String>,
    pub language: String,
    pub top_k: Option<usize>,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            speaker: None,
            language: POOLED.to_string(),
            top_k: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}
