//! Speaker style profiles: mean-pooled encoder latents per speaker and
//! language, candidate ranking, and 2-D projection export.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedText, ProfileRecord};
use crate::error::{Error, Result};
use crate::forest::{pair_features, ForestModel};
use crate::siamese::EncoderModel;
use crate::vecmath::{cosine_similarity, mean_pool_keyed, pca_project, Projection2D};

/// Language tag of a profile pooled over all languages.
pub const POOLED: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileScope {
    PerLanguage,
    Pooled,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub scope: ProfileScope,
    /// Let augmented external items contribute.
    pub include_external: bool,
    /// Keep only items the forest judges consistent with their speaker.
    pub forest_gate: bool,
    pub gate_peers: usize,
    pub gate_threshold: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            scope: ProfileScope::Both,
            include_external: false,
            forest_gate: true,
            gate_peers: 5,
            gate_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub speaker: String,
    pub language: String,
    pub vector: Vec<f64>,
    pub n_samples: usize,
    /// Ids whose latents were averaged, sorted.
    pub contributors: Vec<String>,
}

impl StyleProfile {
    pub fn to_record(&self) -> ProfileRecord {
        ProfileRecord {
            speaker: self.speaker.clone(),
            language: self.language.clone(),
            vector: self.vector.clone(),
        }
    }
}

/// Latents of `items`, keyed by id.
pub fn encode_items(model: &EncoderModel, items: &[&EmbeddedText]) -> Result<HashMap<String, Vec<f64>>> {
    if items.is_empty() {
        return Ok(HashMap::new());
    }
    let dim = model.input_dim();
    let mut flat = Vec::with_capacity(items.len() * dim);
    for item in items {
        if item.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: item.embedding.len(),
            });
        }
        flat.extend_from_slice(&item.embedding);
    }
    let x = Array2::from_shape_vec((items.len(), dim), flat).expect("row-major embeddings");
    let latents = model.encode_batch(x.view())?;
    Ok(items
        .iter()
        .zip(latents.outer_iter())
        .map(|(i, l)| (i.id().to_string(), l.to_vec()))
        .collect())
}

/// Items whose mean forest probability of being a same-style pair with
/// their same-speaker peers exceeds the threshold.
///
/// Peers are the next `gate_peers` items of the same speaker in id order,
/// wrapping around. A speaker none of whose items pass keeps all of them,
/// so no speaker loses its profile to the gate.
pub fn forest_gate<'a>(
    forest: &ForestModel,
    latents: &HashMap<String, Vec<f64>>,
    items: &[&'a EmbeddedText],
    cfg: &ProfileConfig,
) -> Result<Vec<&'a EmbeddedText>> {
    let mut by_speaker: BTreeMap<&str, Vec<&'a EmbeddedText>> = BTreeMap::new();
    for &item in items {
        by_speaker.entry(item.record.speaker.as_str()).or_default().push(item);
    }
    let mut kept = Vec::new();
    for (speaker, mut group) in by_speaker {
        group.sort_by(|a, b| a.id().cmp(b.id()));
        if group.len() < 2 {
            kept.extend(group);
            continue;
        }
        let peers = cfg.gate_peers.min(group.len() - 1).max(1);
        let mut passed = Vec::new();
        for (i, item) in group.iter().enumerate() {
            let mut similar = 0.0;
            for k in 1..=peers {
                let peer = group[(i + k) % group.len()];
                let f = pair_features(&latents[item.id()], &latents[peer.id()])?;
                similar += 1.0 - forest.predict_proba(&f)?;
            }
            if similar / peers as f64 > cfg.gate_threshold {
                passed.push(*item);
            }
        }
        if passed.is_empty() {
            log::warn!("no item of speaker `{speaker}` passed the forest gate; keeping all");
            kept.extend(group);
        } else {
            kept.extend(passed);
        }
    }
    Ok(kept)
}

/// Mean-pools the latents of `items` per speaker and scope. Output is sorted
/// by speaker, then language, with `"*"` first.
pub fn pool_profiles(
    latents: &HashMap<String, Vec<f64>>,
    items: &[&EmbeddedText],
    scope: ProfileScope,
) -> Result<Vec<StyleProfile>> {
    if items.is_empty() {
        return Err(Error::EmptyGroup("no items to build profiles from".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<(&str, &[f64])>> = BTreeMap::new();
    for item in items {
        let latent = latents
            .get(item.id())
            .ok_or_else(|| Error::InconsistentInput(format!("item `{}` has no latent", item.id())))?;
        let speaker = item.record.speaker.clone();
        if matches!(scope, ProfileScope::PerLanguage | ProfileScope::Both) {
            groups
                .entry((speaker.clone(), item.record.language.clone()))
                .or_default()
                .push((item.id(), latent.as_slice()));
        }
        if matches!(scope, ProfileScope::Pooled | ProfileScope::Both) {
            groups
                .entry((speaker, POOLED.to_string()))
                .or_default()
                .push((item.id(), latent.as_slice()));
        }
    }
    groups
        .into_iter()
        .map(|((speaker, language), members)| {
            let vector = mean_pool_keyed(&members)?;
            let mut contributors: Vec<String> = members.iter().map(|(id, _)| id.to_string()).collect();
            contributors.sort();
            Ok(StyleProfile {
                speaker,
                language,
                vector,
                n_samples: members.len(),
                contributors,
            })
        })
        .collect()
}

/// Encodes `items`, applies the optional forest gate, and pools profiles.
pub fn build_profiles(
    model: &EncoderModel,
    forest: Option<&ForestModel>,
    items: &[&EmbeddedText],
    cfg: &ProfileConfig,
) -> Result<Vec<StyleProfile>> {
    let selected: Vec<&EmbeddedText> = items
        .iter()
        .copied()
        .filter(|i| cfg.include_external || i.record.is_speaker())
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyGroup("no eligible items for any speaker".into()));
    }
    let latents = encode_items(model, &selected)?;
    let selected = match forest {
        Some(f) if cfg.forest_gate => forest_gate(f, &latents, &selected, cfg)?,
        _ => selected,
    };
    pool_profiles(&latents, &selected, cfg.scope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub id: String,
    pub score: f64,
    pub rank: usize,
}

/// Ranks candidates by cosine similarity to `profile`, best first; equal
/// scores are ordered by id.
pub fn rank_candidates(profile: &[f64], candidates: &[(String, Vec<f64>)]) -> Result<Vec<RankedCandidate>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut scored = candidates
        .iter()
        .map(|(id, v)| Ok((id.clone(), cosine_similarity(profile, v)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| RankedCandidate { id, score, rank: i + 1 })
        .collect())
}

/// Projects profiles to 2-D and renders `speaker,language,x,y` CSV.
pub fn export_profiles_projection(profiles: &[StyleProfile]) -> Result<(Projection2D, String)> {
    let vectors: Vec<&[f64]> = profiles.iter().map(|p| p.vector.as_slice()).collect();
    let projection = pca_project(&vectors)?;
    let mut csv = String::from("speaker,language,x,y\n");
    for (p, [x, y]) in profiles.iter().zip(&projection.points) {
        csv.push_str(&format!("{},{},{x},{y}\n", p.speaker, p.language));
    }
    Ok((projection, csv))
}
