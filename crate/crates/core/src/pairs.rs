//! Contrastive pair construction.
//!
//! Triplets come first: each eligible anchor gets one positive (same speaker,
//! different cluster) and one negative (different speaker, same cluster).
//! Triplets are then flattened into labelled pairs, deduplicated, balanced,
//! and split into train/validation/test sets.
//!
//! Labels follow the contrastive-loss convention: `0` for a similar-style
//! pair, `1` for a dissimilar one.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterResult;
use crate::corpus::{PairRecord, TextRecord};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const SIMILAR: u8 = 0;
pub const DISSIMILAR: u8 = 1;

/// The speaker and cluster of one text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledItem {
    pub id: String,
    pub speaker: String,
    pub cluster: usize,
}

/// Attaches cluster indices to records. Every record must be clustered.
pub fn label_items<'a>(
    records: impl IntoIterator<Item = &'a TextRecord>,
    clusters: &ClusterResult,
) -> Result<Vec<LabeledItem>> {
    let assignment = clusters.assignment();
    records
        .into_iter()
        .map(|r| {
            let &cluster = assignment.get(r.id.as_str()).ok_or_else(|| {
                Error::InconsistentInput(format!("item `{}` has no cluster", r.id))
            })?;
            Ok(LabeledItem {
                id: r.id.clone(),
                speaker: r.speaker.clone(),
                cluster,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    /// Anchors without a valid positive or negative.
    pub skipped: usize,
}

/// Samples one positive and one negative per eligible anchor.
///
/// Each anchor draws from its own random stream keyed by `(seed, anchor id)`,
/// so the result does not depend on processing order.
pub fn build_triplets(items: &[LabeledItem], seed: u64) -> Result<TripletSet> {
    let speakers: BTreeSet<&str> = items.iter().map(|i| i.speaker.as_str()).collect();
    let cluster_ids: BTreeSet<usize> = items.iter().map(|i| i.cluster).collect();
    if speakers.len() < 2 {
        return Err(Error::NoValidTriplets("need at least two speakers".into()));
    }
    if cluster_ids.len() < 2 {
        return Err(Error::NoValidTriplets("need at least two clusters".into()));
    }

    let mut sorted: Vec<&LabeledItem> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut by_speaker: HashMap<&str, Vec<&LabeledItem>> = HashMap::new();
    let mut by_cluster: HashMap<usize, Vec<&LabeledItem>> = HashMap::new();
    for &item in &sorted {
        by_speaker.entry(&item.speaker).or_default().push(item);
        by_cluster.entry(item.cluster).or_default().push(item);
    }

    let mut triplets = Vec::new();
    let mut skipped = 0;
    for anchor in &sorted {
        let positives: Vec<&LabeledItem> = by_speaker[anchor.speaker.as_str()]
            .iter()
            .filter(|i| i.cluster != anchor.cluster)
            .copied()
            .collect();
        let negatives: Vec<&LabeledItem> = by_cluster[&anchor.cluster]
            .iter()
            .filter(|i| i.speaker != anchor.speaker)
            .copied()
            .collect();
        if positives.is_empty() || negatives.is_empty() {
            skipped += 1;
            continue;
        }
        let mut rng = rng_for(seed, &format!("triplet/{}", anchor.id));
        let positive = positives[rng.random_range(0..positives.len())];
        let negative = negatives[rng.random_range(0..negatives.len())];
        triplets.push(Triplet {
            anchor: anchor.id.clone(),
            positive: positive.id.clone(),
            negative: negative.id.clone(),
        });
    }
    if triplets.is_empty() {
        return Err(Error::NoValidTriplets(format!(
            "none of {} anchors has both a positive and a negative",
            items.len()
        )));
    }
    Ok(TripletSet { triplets, skipped })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub pairs: Vec<PairRecord>,
    pub duplicates_removed: usize,
    /// Pairs dropped from the majority label to reach exact balance.
    pub downsampled: usize,
}

fn unordered_key(p: &PairRecord) -> (String, String, u8) {
    if p.a <= p.b {
        (p.a.clone(), p.b.clone(), p.label)
    } else {
        (p.b.clone(), p.a.clone(), p.label)
    }
}

/// Drops random pairs of the majority label until both labels are equally
/// frequent. Survivors keep their relative order.
fn balance(pairs: Vec<PairRecord>, seed: u64) -> (Vec<PairRecord>, usize) {
    let similar = pairs.iter().filter(|p| p.label == SIMILAR).count();
    let dissimilar = pairs.len() - similar;
    if similar == dissimilar {
        return (pairs, 0);
    }
    let majority = if similar > dissimilar { SIMILAR } else { DISSIMILAR };
    let excess = similar.abs_diff(dissimilar);
    let mut candidates: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label == majority).collect();
    candidates.shuffle(&mut rng_for(seed, "pairs/balance"));
    let drop: HashSet<usize> = candidates.into_iter().take(excess).collect();
    let kept = pairs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, p)| p)
        .collect();
    (kept, excess)
}

pub fn triplets_to_pairs(triplets: &[Triplet], seed: u64) -> Result<PairSet> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(triplets.len() * 2);
    let mut duplicates_removed = 0;
    for t in triplets {
        for (other, label) in [(&t.positive, SIMILAR), (&t.negative, DISSIMILAR)] {
            let pair = PairRecord {
                a: t.anchor.clone(),
                b: other.clone(),
                label,
            };
            if seen.insert(unordered_key(&pair)) {
                pairs.push(pair);
            } else {
                duplicates_removed += 1;
            }
        }
    }
    let (pairs, downsampled) = balance(pairs, seed);
    Ok(PairSet {
        pairs,
        duplicates_removed,
        downsampled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train, self.val, self.test];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::ConfigInvalid("split fractions must lie in [0, 1]".into()));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::ConfigInvalid("split fractions must sum to 1".into()));
        }
        Ok(())
    }
}

/// Indices into the split input, per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Pairs left out of every split to balance labels.
    pub downsampled: Vec<usize>,
}

pub const MIN_PAIRS_TO_SPLIT: usize = 10;

/// Seeded, label-stratified split.
///
/// Split sizes are rounded from the fractions of the total; inside a split
/// the two labels differ by at most one pair. An unbalanced input is first
/// balanced by dropping random majority-label pairs, which are reported in
/// [`Splits::downsampled`].
pub fn split_pairs(pairs: &[PairRecord], cfg: &SplitConfig) -> Result<Splits> {
    cfg.validate()?;
    if pairs.len() < MIN_PAIRS_TO_SPLIT {
        return Err(Error::TooFewPairs {
            needed: MIN_PAIRS_TO_SPLIT,
            got: pairs.len(),
        });
    }
    let mut by_label: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_label.entry(p.label).or_default().push(i);
    }
    let mut rng = rng_for(cfg.seed, "pairs/split");
    let mut similar = by_label.remove(&SIMILAR).unwrap_or_default();
    let mut dissimilar = by_label.remove(&DISSIMILAR).unwrap_or_default();
    similar.shuffle(&mut rng);
    dissimilar.shuffle(&mut rng);
    let half = similar.len().min(dissimilar.len());
    let mut downsampled: Vec<usize> = similar.split_off(half);
    downsampled.extend(dissimilar.split_off(half));
    downsampled.sort_unstable();
    if 2 * half < MIN_PAIRS_TO_SPLIT {
        return Err(Error::TooFewPairs {
            needed: MIN_PAIRS_TO_SPLIT,
            got: 2 * half,
        });
    }

    let n = 2 * half;
    let n_train = ((cfg.train * n as f64).round() as usize).min(n);
    let n_val = ((cfg.val * n as f64).round() as usize).min(n - n_train);
    let train_similar = n_train.div_ceil(2);
    let val_similar = n_val / 2;
    let train_dissimilar = n_train - train_similar;
    let val_dissimilar = n_val - val_similar;

    let take = |pool: &[usize], t: usize, v: usize| -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        (pool[..t].to_vec(), pool[t..t + v].to_vec(), pool[t + v..].to_vec())
    };
    let (mut train, mut val, mut test) = take(&similar, train_similar, val_similar);
    let (t1, v1, s1) = take(&dissimilar, train_dissimilar, val_dissimilar);
    train.extend(t1);
    val.extend(v1);
    test.extend(s1);
    train.shuffle(&mut rng);
    val.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(Splits {
        train,
        val,
        test,
        downsampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn li(id: &str, speaker: &str, cluster: usize) -> LabeledItem {
        LabeledItem {
            id: id.into(),
            speaker: speaker.into(),
            cluster,
        }
    }

    #[test]
    fn toy_grid_gives_one_triplet_per_anchor() {
        // Exhaustive enumeration: each anchor has exactly one positive and
        // one negative on the 2x2 grid.
        let items = vec![li("a0", "a", 0), li("a1", "a", 1), li("b0", "b", 0), li("b1", "b", 1)];
        let set = build_triplets(&items, 1).unwrap();
        let expected = vec![
            Triplet { anchor: "a0".into(), positive: "a1".into(), negative: "b0".into() },
            Triplet { anchor: "a1".into(), positive: "a0".into(), negative: "b1".into() },
            Triplet { anchor: "b0".into(), positive: "b1".into(), negative: "a0".into() },
            Triplet { anchor: "b1".into(), positive: "b0".into(), negative: "a1".into() },
        ];
        assert_eq!(set.triplets, expected);
        assert_eq!(set.skipped, 0);
    }

    #[test]
    fn degenerate_corpora() {
        let single_speaker = vec![li("a0", "a", 0), li("a1", "a", 1)];
        assert!(matches!(build_triplets(&single_speaker, 1), Err(Error::NoValidTriplets(_))));
        let single_cluster = vec![li("a0", "a", 0), li("b0", "b", 0)];
        assert!(matches!(build_triplets(&single_cluster, 1), Err(Error::NoValidTriplets(_))));
        // Two speakers and two clusters, but no speaker spans two clusters.
        let disjoint = vec![li("a0", "a", 0), li("b1", "b", 1)];
        assert!(matches!(build_triplets(&disjoint, 1), Err(Error::NoValidTriplets(_))));
    }

    #[test]
    fn ineligible_anchors_are_counted() {
        let items = vec![li("a0", "a", 0), li("a1", "a", 1), li("b0", "b", 0), li("c2", "c", 2)];
        let set = build_triplets(&items, 3).unwrap();
        assert_eq!(set.triplets.len(), 1);
        assert_eq!(set.triplets[0].anchor, "a0");
        assert_eq!(set.skipped, 3);
    }

    #[test]
    fn anchor_streams_are_order_independent() {
        let mut items: Vec<LabeledItem> = (0..40)
            .map(|i| li(&format!("i{i:02}"), &format!("s{}", i % 4), i % 5))
            .collect();
        let a = build_triplets(&items, 9).unwrap();
        items.reverse();
        let b = build_triplets(&items, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_triplet_gives_two_pairs() {
        let t = Triplet { anchor: "x".into(), positive: "p".into(), negative: "n".into() };
        let set = triplets_to_pairs(&[t], 0).unwrap();
        assert_eq!(
            set.pairs,
            vec![
                PairRecord { a: "x".into(), b: "p".into(), label: 0 },
                PairRecord { a: "x".into(), b: "n".into(), label: 1 },
            ]
        );
    }

    #[test]
    fn shared_edges_are_deduplicated_then_balanced() {
        let triplets = vec![
            Triplet { anchor: "a".into(), positive: "b".into(), negative: "x".into() },
            Triplet { anchor: "b".into(), positive: "a".into(), negative: "y".into() },
        ];
        let set = triplets_to_pairs(&triplets, 0).unwrap();
        assert_eq!(set.duplicates_removed, 1);
        assert_eq!(set.downsampled, 1);
        let similar = set.pairs.iter().filter(|p| p.label == 0).count();
        assert_eq!(similar, 1);
        assert_eq!(set.pairs.len(), 2);
    }

    fn balanced(n: usize) -> Vec<PairRecord> {
        (0..n)
            .map(|i| PairRecord {
                a: format!("a{i}"),
                b: format!("b{i}"),
                label: (i % 2) as u8,
            })
            .collect()
    }

    #[test]
    fn stratified_split_arithmetic() {
        let pairs = balanced(100);
        let s = split_pairs(&pairs, &SplitConfig::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 15, 15));
        let count = |idx: &[usize], l: u8| idx.iter().filter(|&&i| pairs[i].label == l).count();
        assert_eq!(count(&s.train, 0), 35);
        assert_eq!(count(&s.train, 1), 35);
        assert!([7, 8].contains(&count(&s.val, 0)));
        assert!([7, 8].contains(&count(&s.test, 0)));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_edge_cases() {
        let pairs = balanced(20);
        let all_train = SplitConfig { train: 1.0, val: 0.0, test: 0.0, seed: 1 };
        let s = split_pairs(&pairs, &all_train).unwrap();
        assert_eq!(s.train.len(), 20);
        assert!(s.val.is_empty() && s.test.is_empty());

        let cfg = SplitConfig { seed: 5, ..SplitConfig::default() };
        assert_eq!(split_pairs(&pairs, &cfg).unwrap(), split_pairs(&pairs, &cfg).unwrap());
        assert!(matches!(split_pairs(&balanced(8), &cfg), Err(Error::TooFewPairs { .. })));
        let bad = SplitConfig { train: 0.5, val: 0.1, test: 0.1, seed: 0 };
        assert!(split_pairs(&pairs, &bad).is_err());
    }

    #[test]
    fn unbalanced_input_is_downsampled_and_logged() {
        let mut pairs = balanced(20);
        for i in 0..6 {
            pairs.push(PairRecord { a: format!("c{i}"), b: format!("d{i}"), label: 0 });
        }
        let s = split_pairs(&pairs, &SplitConfig::default()).unwrap();
        assert_eq!(s.downsampled.len(), 6);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 20);
    }
}
