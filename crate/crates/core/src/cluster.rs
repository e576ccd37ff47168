//! Bottom-up agglomerative clustering with centroid linkage.
//!
//! Every item starts as its own cluster. At each step the pair of clusters
//! with the smallest centroid distance is merged, provided the merged
//! cluster's radius (largest centroid-to-member distance) stays within
//! `max_radius`. Clustering ends when no admissible pair is left.
//!
//! Equal distances are broken by the pair's smallest member ids, compared
//! lexicographically, which makes the merge sequence fully deterministic.
//!
//! Cluster labels in the merge log follow the usual dendrogram convention:
//! singletons are labelled by input position `0..n`, and the k-th merge
//! creates label `n + k`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{ClusterRecord, EmbeddedText};
use crate::error::{Error, Result};
use crate::vecmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `1 - cosine_similarity`.
    CosineDistance,
    Euclidean,
}

impl Metric {
    /// Distance under this metric. Cosine distance involving a zero vector is
    /// infinite, which makes any merge producing a zero centroid inadmissible.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::CosineDistance => vecmath::cosine_distance(a, b).unwrap_or(f64::INFINITY),
            Metric::Euclidean => vecmath::euclidean_distance(a, b).unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub metric: Metric,
    pub max_radius: f64,
    /// Rescale each centroid to unit norm after averaging.
    pub renormalize_centroids: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            metric: Metric::CosineDistance,
            max_radius: 0.35,
            renormalize_centroids: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Label of the cluster holding the smaller member id.
    pub a: usize,
    pub b: usize,
    /// Label given to the merged cluster.
    pub merged: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Item ids in input order.
    pub ids: Vec<String>,
    /// Dense cluster index per item, aligned with `ids`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub merge_log: Vec<MergeStep>,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn assignment(&self) -> HashMap<&str, usize> {
        self.ids.iter().map(String::as_str).zip(self.labels.iter().copied()).collect()
    }

    /// Input positions of each cluster's members.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Rebuilds a result from stored assignments. Centroids and radii are
    /// recomputed from `items`; the merge log is not recoverable and is left
    /// empty. Cluster indices must be dense.
    pub fn from_records(records: &[ClusterRecord], items: &[EmbeddedText], cfg: &ClusterConfig) -> Result<Self> {
        let by_id: HashMap<&str, usize> = records.iter().map(|r| (r.id.as_str(), r.cluster)).collect();
        if by_id.len() != items.len() || records.len() != items.len() {
            return Err(Error::InconsistentInput(format!(
                "{} cluster records for {} items",
                records.len(),
                items.len()
            )));
        }
        let labels = items
            .iter()
            .map(|i| {
                by_id
                    .get(i.id())
                    .copied()
                    .ok_or_else(|| Error::InconsistentInput(format!("item `{}` has no cluster", i.id())))
            })
            .collect::<Result<Vec<usize>>>()?;
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            members[c].push(i);
        }
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(Error::InconsistentInput(format!("cluster index {c} has no members")));
        }
        let vectors: Vec<&[f64]> = items.iter().map(|i| i.embedding.as_slice()).collect();
        let mut centroids = Vec::with_capacity(k);
        let mut radii = Vec::with_capacity(k);
        for m in &mut members {
            m.sort_by(|&a, &b| items[a].id().cmp(items[b].id()));
            let c = centroid_of(m, &vectors, cfg.renormalize_centroids);
            radii.push(m.iter().map(|&i| cfg.metric.distance(&c, vectors[i])).fold(0.0, f64::max));
            centroids.push(c);
        }
        Ok(Self {
            ids: items.iter().map(|i| i.id().to_string()).collect(),
            labels,
            centroids,
            radii,
            merge_log: Vec::new(),
        })
    }

    pub fn to_records(&self) -> Vec<ClusterRecord> {
        self.ids
            .iter()
            .zip(&self.labels)
            .map(|(id, &cluster)| ClusterRecord {
                id: id.clone(),
                cluster,
            })
            .collect()
    }
}

/// Mean of the given members in ascending id-rank order.
pub(crate) fn centroid_of(members: &[usize], vectors: &[&[f64]], renormalize: bool) -> Vec<f64> {
    let vs: Vec<&[f64]> = members.iter().map(|&m| vectors[m]).collect();
    let c = vecmath::mean_pool(&vs).expect("clusters are nonempty and share a dimension");
    if renormalize {
        vecmath::normalize(&c).unwrap_or(c)
    } else {
        c
    }
}

struct Cluster {
    /// Input positions, sorted by id rank.
    members: Vec<usize>,
    centroid: Vec<f64>,
    /// Smallest id rank among members.
    key: usize,
}

#[derive(PartialEq)]
struct Candidate {
    distance: f64,
    keys: (usize, usize),
    labels: (usize, usize),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.keys.cmp(&other.keys))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn candidate(clusters: &[Option<Cluster>], x: usize, y: usize, metric: Metric) -> Option<Candidate> {
    let (cx, cy) = (clusters[x].as_ref()?, clusters[y].as_ref()?);
    let distance = metric.distance(&cx.centroid, &cy.centroid);
    if !distance.is_finite() {
        return None;
    }
    let (first, second) = if cx.key < cy.key { (x, y) } else { (y, x) };
    Some(Candidate {
        distance,
        keys: (cx.key.min(cy.key), cx.key.max(cy.key)),
        labels: (first, second),
    })
}

/// Clusters raw vectors identified by unique `ids`.
pub fn agglomerate_vectors(ids: &[&str], vectors: &[&[f64]], cfg: &ClusterConfig) -> Result<ClusterResult> {
    if ids.len() != vectors.len() {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: vectors.len(),
        });
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(cfg.max_radius > 0.0) {
        return Err(Error::ConfigInvalid("cluster.max_radius must be positive".into()));
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }
    let n = ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ids[a].cmp(ids[b]));
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    for w in order.windows(2) {
        if ids[w[0]] == ids[w[1]] {
            return Err(Error::InconsistentInput(format!("duplicate id `{}`", ids[w[0]])));
        }
    }

    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|i| {
            Some(Cluster {
                members: vec![i],
                centroid: centroid_of(&[i], vectors, cfg.renormalize_centroids),
                key: rank[i],
            })
        })
        .collect();

    let mut heap = BinaryHeap::new();
    for x in 0..n {
        for y in x + 1..n {
            if let Some(c) = candidate(&clusters, x, y, cfg.metric) {
                heap.push(Reverse(c));
            }
        }
    }

    let mut merge_log = Vec::new();
    let mut radii: Vec<f64> = vec![0.0; n];
    let mut alive: Vec<usize> = (0..n).collect();
    while let Some(Reverse(cand)) = heap.pop() {
        let (a, b) = cand.labels;
        let (Some(ca), Some(cb)) = (&clusters[a], &clusters[b]) else {
            continue;
        };
        let mut members: Vec<usize> = ca.members.iter().chain(&cb.members).copied().collect();
        members.sort_by_key(|&m| rank[m]);
        let centroid = centroid_of(&members, vectors, cfg.renormalize_centroids);
        let radius = members
            .iter()
            .map(|&m| cfg.metric.distance(&centroid, vectors[m]))
            .fold(0.0f64, f64::max);
        // Inadmissible pairs stay inadmissible: neither side changes until merged.
        if !(radius <= cfg.max_radius) {
            continue;
        }
        let key = ca.key.min(cb.key);
        let label = clusters.len();
        clusters[a] = None;
        clusters[b] = None;
        clusters.push(Some(Cluster {
            members,
            centroid,
            key,
        }));
        radii.push(radius);
        merge_log.push(MergeStep {
            a,
            b,
            merged: label,
            distance: cand.distance,
        });
        alive.retain(|&l| l != a && l != b);
        for &other in &alive {
            if let Some(c) = candidate(&clusters, other, label, cfg.metric) {
                heap.push(Reverse(c));
            }
        }
        alive.push(label);
    }

    let mut finals: Vec<usize> = alive;
    finals.sort_by_key(|&l| clusters[l].as_ref().map(|c| c.key));
    let mut labels = vec![0; n];
    let mut centroids = Vec::with_capacity(finals.len());
    let mut final_radii = Vec::with_capacity(finals.len());
    for (dense, &l) in finals.iter().enumerate() {
        let c = clusters[l].as_ref().expect("alive cluster");
        for &m in &c.members {
            labels[m] = dense;
        }
        centroids.push(c.centroid.clone());
        final_radii.push(radii[l]);
    }

    Ok(ClusterResult {
        ids: ids.iter().map(|s| s.to_string()).collect(),
        labels,
        centroids,
        radii: final_radii,
        merge_log,
    })
}

pub fn agglomerate(items: &[EmbeddedText], cfg: &ClusterConfig) -> Result<ClusterResult> {
    let ids: Vec<&str> = items.iter().map(|i| i.id()).collect();
    let vectors: Vec<&[f64]> = items.iter().map(|i| i.embedding.as_slice()).collect();
    agglomerate_vectors(&ids, &vectors, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub size: usize,
    pub speaker_count: usize,
    pub external_count: usize,
}

pub fn cluster_stats(result: &ClusterResult, items: &[EmbeddedText]) -> Result<Vec<ClusterStats>> {
    if items.len() != result.ids.len() {
        return Err(Error::InconsistentInput(format!(
            "{} items but {} clustered ids",
            items.len(),
            result.ids.len()
        )));
    }
    let assignment = result.assignment();
    let mut stats: Vec<ClusterStats> = (0..result.n_clusters())
        .map(|cluster| ClusterStats {
            cluster,
            size: 0,
            speaker_count: 0,
            external_count: 0,
        })
        .collect();
    for item in items {
        let &c = assignment.get(item.id()).ok_or_else(|| {
            Error::InconsistentInput(format!("item `{}` is not in the clustering", item.id()))
        })?;
        let s = &mut stats[c];
        s.size += 1;
        if item.record.is_speaker() {
            s.speaker_count += 1;
        } else {
            s.external_count += 1;
        }
    }
    Ok(stats)
}
