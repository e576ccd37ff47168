//! Stylistic augmentation: keep the external texts closest in style to the
//! speaker data of their cluster.
//!
//! Per cluster, the speaker items are mean-pooled into a centroid and every
//! member is scored by cosine similarity to it. All speaker items are kept,
//! along with the `k = min(top_k_cap, ceil(keep_fraction * n))` best-scoring
//! externals. Clusters without speaker items are dropped.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterResult;
use crate::corpus::EmbeddedText;
use crate::embedder::TruthRecord;
use crate::error::{Error, Result};
use crate::vecmath::{cosine_similarity, mean_pool_keyed};

/// What `n` counts in the keep rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionBasis {
    /// `n` is the number of externals in the cluster.
    ExternalOnly,
    /// `n` is the full cluster size; at most all externals are kept.
    AllMembers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub top_k_cap: usize,
    pub keep_fraction: f64,
    pub basis: SelectionBasis,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            top_k_cap: 15,
            keep_fraction: 0.70,
            basis: SelectionBasis::ExternalOnly,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k_cap == 0 {
            return Err(Error::ConfigInvalid("augment.top_k_cap must be positive".into()));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::ConfigInvalid("augment.keep_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Number of externals to keep from a cluster.
    pub fn keep_count(&self, n_external: usize, n_speaker: usize) -> usize {
        let n = match self.basis {
            SelectionBasis::ExternalOnly => n_external,
            SelectionBasis::AllMembers => n_external + n_speaker,
        };
        // The epsilon absorbs products like 0.7 * 30 = 21.000000000000004.
        let fraction = (self.keep_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
        fraction.min(self.top_k_cap).min(n_external)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAugment {
    pub cluster: usize,
    /// Speaker with the most speaker items; ties go to the smallest name.
    pub dominant_speaker: String,
    pub speaker_ids: Vec<String>,
    /// Kept externals, best score first.
    pub kept_external: Vec<ScoredItem>,
    pub dropped_external: Vec<ScoredItem>,
    pub speaker_scores: Vec<ScoredItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub clusters: Vec<ClusterAugment>,
    pub dropped_clusters: Vec<usize>,
    /// Externals lost with dropped clusters.
    pub dropped_cluster_items: usize,
}

impl AugmentReport {
    pub fn kept_ids(&self) -> HashSet<&str> {
        self.clusters
            .iter()
            .flat_map(|c| {
                c.speaker_ids
                    .iter()
                    .map(String::as_str)
                    .chain(c.kept_external.iter().map(|s| s.id.as_str()))
            })
            .collect()
    }

    /// Surviving items in their original order.
    pub fn filter<'a>(&self, items: &'a [EmbeddedText]) -> Vec<&'a EmbeddedText> {
        let kept = self.kept_ids();
        items.iter().filter(|i| kept.contains(i.id())).collect()
    }
}

fn rank_desc(scored: &mut [ScoredItem]) {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
}

pub fn augment(items: &[EmbeddedText], clusters: &ClusterResult, cfg: &AugmentConfig) -> Result<AugmentReport> {
    cfg.validate()?;
    let assignment = clusters.assignment();
    if items.len() != clusters.ids.len() {
        return Err(Error::InconsistentInput(format!(
            "{} items but {} clustered ids",
            items.len(),
            clusters.ids.len()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<&EmbeddedText>> = BTreeMap::new();
    for item in items {
        let &c = assignment.get(item.id()).ok_or_else(|| {
            Error::InconsistentInput(format!("item `{}` has no cluster", item.id()))
        })?;
        groups.entry(c).or_default().push(item);
    }

    let mut report = AugmentReport::default();
    for c in 0..clusters.n_clusters() {
        let members = groups.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        let (speakers, externals): (Vec<&EmbeddedText>, Vec<&EmbeddedText>) =
            members.iter().partition(|i| i.record.is_speaker());
        if speakers.is_empty() {
            report.dropped_clusters.push(c);
            report.dropped_cluster_items += externals.len();
            continue;
        }
        let keyed: Vec<(&str, &[f64])> = speakers.iter().map(|i| (i.id(), i.embedding.as_slice())).collect();
        let centroid = mean_pool_keyed(&keyed)?;
        let score = |i: &EmbeddedText| -> Result<ScoredItem> {
            Ok(ScoredItem {
                id: i.id().to_string(),
                score: cosine_similarity(&centroid, &i.embedding)?,
            })
        };
        let mut external_scores = externals.iter().map(|i| score(i)).collect::<Result<Vec<_>>>()?;
        let mut speaker_scores = speakers.iter().map(|i| score(i)).collect::<Result<Vec<_>>>()?;
        rank_desc(&mut external_scores);
        rank_desc(&mut speaker_scores);
        let k = cfg.keep_count(externals.len(), speakers.len());
        let dropped_external = external_scores.split_off(k);

        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &speakers {
            *counts.entry(s.record.speaker.as_str()).or_default() += 1;
        }
        let max = counts.values().copied().max().unwrap_or(0);
        let dominant_speaker = counts
            .iter()
            .find(|(_, &n)| n == max)
            .map(|(s, _)| s.to_string())
            .unwrap_or_default();

        let mut speaker_ids: Vec<String> = speakers.iter().map(|i| i.id().to_string()).collect();
        speaker_ids.sort();
        report.clusters.push(ClusterAugment {
            cluster: c,
            dominant_speaker,
            speaker_ids,
            kept_external: external_scores,
            dropped_external,
            speaker_scores,
        });
    }
    if report.clusters.is_empty() {
        return Err(Error::NoSpeakerData);
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl ScoreSummary {
    fn of(scores: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = scores.collect();
        if v.is_empty() {
            return Self::default();
        }
        Self {
            count: v.len(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub surviving_clusters: usize,
    pub dropped_clusters: usize,
    pub speaker_items: usize,
    pub kept_externals: usize,
    pub dropped_externals: usize,
    pub kept_scores: ScoreSummary,
    pub dropped_scores: ScoreSummary,
    /// Fraction of kept externals whose true style is the dominant
    /// speaker's; present only when a truth table is supplied.
    pub style_match_fraction: Option<f64>,
}

pub fn quality_report(report: &AugmentReport, truth: Option<&[TruthRecord]>) -> QualitySummary {
    let kept = report.clusters.iter().flat_map(|c| c.kept_external.iter());
    let dropped = report.clusters.iter().flat_map(|c| c.dropped_external.iter());
    let mut summary = QualitySummary {
        surviving_clusters: report.clusters.len(),
        dropped_clusters: report.dropped_clusters.len(),
        speaker_items: report.clusters.iter().map(|c| c.speaker_ids.len()).sum(),
        kept_externals: kept.clone().count(),
        dropped_externals: dropped.clone().count() + report.dropped_cluster_items,
        kept_scores: ScoreSummary::of(kept.map(|s| s.score)),
        dropped_scores: ScoreSummary::of(dropped.map(|s| s.score)),
        style_match_fraction: None,
    };
    if let Some(truth) = truth {
        let style: HashMap<&str, usize> = truth.iter().map(|t| (t.id.as_str(), t.style)).collect();
        let (mut matched, mut total) = (0usize, 0usize);
        for c in &report.clusters {
            // Majority true style among the cluster's speaker items.
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for id in &c.speaker_ids {
                if let Some(&st) = style.get(id.as_str()) {
                    *counts.entry(st).or_default() += 1;
                }
            }
            let Some(target) = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&st, _)| st)
            else {
                continue;
            };
            for s in &c.kept_external {
                if let Some(&st) = style.get(s.id.as_str()) {
                    total += 1;
                    matched += usize::from(st == target);
                }
            }
        }
        if total > 0 {
            summary.style_match_fraction = Some(matched as f64 / total as f64);
        }
    }
    summary
}
