//! Random forest pair classifier.
//!
//! Trees are grown on bootstrap samples with Gini impurity. At each node a
//! random subset of features is searched; candidate thresholds are the
//! midpoints between consecutive distinct sample values, and a sample goes
//! left when its value is `<= threshold`.
//!
//! Split selection uses exact integer arithmetic. The best split maximises
//! `sum_c(l_c^2) / n_l + sum_c(r_c^2) / n_r`, which is equivalent to
//! minimising the size-weighted child impurity. Equal scores keep the first
//! candidate in (feature ascending, threshold ascending) order. A node is
//! split only when the best split strictly lowers the impurity and both
//! children hold at least `min_samples_leaf` samples.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// `[|a - b| ‖ a * b]`, symmetric in its arguments.
pub fn pair_features(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut out = Vec::with_capacity(2 * a.len());
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    Ok(out)
}

pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `floor(sqrt(feature_dim))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn features_for(&self, feature_dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| ((feature_dim as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if self.n_trees == 0 || self.min_samples_leaf == 0 || self.max_depth == Some(0) {
            return Err(Error::ConfigInvalid(
                "n_trees, min_samples_leaf and max_depth must be positive".into(),
            ));
        }
        let k = self.features_for(feature_dim);
        if k == 0 || k > feature_dim {
            return Err(Error::ConfigInvalid(format!(
                "features_per_split {k} must lie in 1..={feature_dim}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Node {
    Split {
        feat: usize,
        thr: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Preorder; the root is node 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Majority label of the leaf reached by `x`; ties vote 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feat, thr, left, right } => {
                    i = if x[*feat] <= *thr { *left } else { *right };
                }
                Node::Leaf { counts } => return u8::from(counts[1] > counts[0]),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(*counts),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub feature_dim: usize,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<Tree>,
}

/// Candidate split score as an exact fraction `num / den`.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn of(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
        let (nl, nr) = ((left[0] + left[1]) as u128, (right[0] + right[1]) as u128);
        Self {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn parent(counts: [usize; 2]) -> Self {
        Self {
            num: (counts[0] * counts[0] + counts[1] * counts[1]) as u128,
            den: (counts[0] + counts[1]) as u128,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    cfg: &'a ForestConfig,
    k: usize,
    dim: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> [usize; 2] {
        let ones = samples.iter().filter(|&&i| self.y[i] == 1).count();
        [samples.len() - ones, ones]
    }

    fn best_split(&mut self, samples: &[usize], counts: [usize; 2]) -> Option<(usize, f64)> {
        let mut features = index::sample(&mut self.rng, self.dim, self.k).into_vec();
        features.sort_unstable();
        let msl = self.cfg.min_samples_leaf;
        let mut best: Option<(Score, usize, f64)> = None;
        let mut column: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
        for feat in features {
            column.clear();
            column.extend(samples.iter().map(|&i| (self.x[i][feat], self.y[i])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 2];
            for j in 0..column.len() - 1 {
                left[column[j].1 as usize] += 1;
                let (lo, hi) = (column[j].0, column[j + 1].0);
                if lo == hi {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                if left[0] + left[1] < msl || right[0] + right[1] < msl {
                    continue;
                }
                let score = Score::of(left, right);
                if best.as_ref().is_none_or(|(b, _, _)| score.cmp(b) == Ordering::Greater) {
                    best = Some((score, feat, midpoint(lo, hi)));
                }
            }
        }
        let (score, feat, thr) = best?;
        (score.cmp(&Score::parent(counts)) == Ordering::Greater).then_some((feat, thr))
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&samples);
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || self.cfg.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((feat, thr)) = self.best_split(&samples, counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| self.x[i][feat] <= thr);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feat, thr, left, right };
        id
    }
}

pub fn tree_seed(seed: u64, tree_index: usize) -> u64 {
    derive_seed(seed, &format!("forest/tree/{tree_index}"))
}

pub fn train_forest(features: &[Vec<f64>], labels: &[u8], cfg: &ForestConfig) -> Result<ForestModel> {
    if features.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InconsistentInput("labels must be 0 or 1".into()));
    }
    if features.len() < 2 || labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::SingleClassInput);
    }
    cfg.validate(dim)?;

    let n = features.len();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut tree_seeds = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees {
        let seed = tree_seed(cfg.seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = Builder {
            x: features,
            y: labels,
            cfg,
            k: cfg.features_for(dim),
            dim,
            rng,
            nodes: Vec::new(),
        };
        builder.grow(samples, 0);
        trees.push(Tree { nodes: builder.nodes });
        tree_seeds.push(seed);
    }
    Ok(ForestModel {
        feature_dim: dim,
        tree_seeds,
        trees,
    })
}

impl ForestModel {
    /// Fraction of trees voting label 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if self.trees.is_empty() {
            return Err(Error::UnfittedModel);
        }
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: x.len(),
            });
        }
        let votes = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? > 0.5))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Binary metrics with label 1 as the positive class. Undefined ratios are
/// reported as 0 with a warning.
pub fn classification_report(y_true: &[u8], y_pred: &[u8]) -> Result<BinaryReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize, name: &str| {
        if den == 0 {
            log::warn!("{name} is undefined (zero denominator); reporting 0");
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, "precision");
    let recall = ratio(tp, tp + fn_, "recall");
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        log::warn!("f1 is undefined (precision and recall are 0); reporting 0");
        0.0
    };
    Ok(BinaryReport {
        accuracy: (tp + tn) as f64 / y_true.len() as f64,
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
        tn,
    })
}

/// Validation and test metrics under their table row names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    #[serde(rename = "Validation Accuracy")]
    pub val_accuracy: f64,
    #[serde(rename = "Validation Precision")]
    pub val_precision: f64,
    #[serde(rename = "Validation Recall")]
    pub val_recall: f64,
    #[serde(rename = "Validation F1 Score")]
    pub val_f1: f64,
    #[serde(rename = "Test Accuracy")]
    pub test_accuracy: f64,
    #[serde(rename = "Test Precision")]
    pub test_precision: f64,
    #[serde(rename = "Test Recall")]
    pub test_recall: f64,
    #[serde(rename = "Test F1 Score")]
    pub test_f1: f64,
}

impl MetricsTable {
    pub fn new(val: &BinaryReport, test: &BinaryReport) -> Self {
        Self {
            val_accuracy: val.accuracy,
            val_precision: val.precision,
            val_recall: val.recall,
            val_f1: val.f1,
            test_accuracy: test.accuracy,
            test_precision: test.precision,
            test_recall: test.recall,
            test_f1: test.f1,
        }
    }
}
