//! Reference implementations used as test oracles. They favour directness
//! over speed and share no code paths with the library beyond the distance
//! metric.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use styleprint_core::cluster::{ClusterConfig, ClusterResult, MergeStep};
use styleprint_core::corpus::{EmbeddedText, Source, TextRecord};
use styleprint_core::forest::Node;
use styleprint_core::siamese::{loss_gradient, pair_loss, EncoderModel};

/// Result of the naive clustering: dense labels (clusters ordered by their
/// smallest member id) and the merge log.
pub struct NaiveClustering {
    pub labels: Vec<usize>,
    pub merge_log: Vec<MergeStep>,
}

fn naive_centroid(members: &[usize], vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for d in 0..dim {
            c[d] += vectors[m][d];
        }
    }
    for x in &mut c {
        *x /= members.len() as f64;
    }
    c
}

/// Recomputes every pairwise merge from scratch at every step.
pub fn naive_agglomerate(ids: &[String], vectors: &[Vec<f64>], cfg: &ClusterConfig) -> NaiveClustering {
    let n = ids.len();
    // Each active cluster: (label, members sorted by id).
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut next_label = n;
    let mut merge_log = Vec::new();
    let min_id = |members: &[usize]| members.iter().map(|&m| ids[m].clone()).min().unwrap();
    loop {
        let mut best: Option<(f64, (String, String), usize, usize, Vec<usize>)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (cx, cy) = (&active[x].1, &active[y].1);
                let distance = cfg.metric.distance(&naive_centroid(cx, vectors), &naive_centroid(cy, vectors));
                if !distance.is_finite() {
                    continue;
                }
                let mut members: Vec<usize> = cx.iter().chain(cy).copied().collect();
                members.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
                let centroid = naive_centroid(&members, vectors);
                let radius = members
                    .iter()
                    .map(|&m| cfg.metric.distance(&centroid, &vectors[m]))
                    .fold(0.0f64, f64::max);
                if !(radius <= cfg.max_radius) {
                    continue;
                }
                let (kx, ky) = (min_id(cx), min_id(cy));
                let (first, second, keys) = if kx < ky { (x, y, (kx, ky)) } else { (y, x, (ky, kx)) };
                let better = match &best {
                    None => true,
                    Some((bd, bk, ..)) => distance < *bd || (distance == *bd && keys < *bk),
                };
                if better {
                    best = Some((distance, keys, first, second, members));
                }
            }
        }
        let Some((distance, _, first, second, members)) = best else {
            break;
        };
        merge_log.push(MergeStep {
            a: active[first].0,
            b: active[second].0,
            merged: next_label,
            distance,
        });
        let (hi, lo) = (first.max(second), first.min(second));
        active.remove(hi);
        active.remove(lo);
        active.push((next_label, members));
        next_label += 1;
    }
    active.sort_by_key(|(_, m)| min_id(m));
    let mut labels = vec![0; n];
    for (dense, (_, members)) in active.iter().enumerate() {
        for &m in members {
            labels[m] = dense;
        }
    }
    NaiveClustering { labels, merge_log }
}

/// Random clustering instance: ids are shuffled relative to input order,
/// and some instances use coarse integer coordinates to provoke ties.
pub fn cluster_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize, integer: bool) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut ids: Vec<String> = (0..n).map(|i| format!("p{i:02}")).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let vectors = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if integer {
                        rng.random_range(-2i32..=2) as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    (ids, vectors)
}

/// Reference tree: no bootstrap, every feature examined, weighted Gini in
/// floating point, and an explicit enumeration of every candidate split.
pub fn exhaustive_tree(x: &[Vec<f64>], y: &[u8], min_samples_leaf: usize, max_depth: Option<usize>) -> Vec<Node> {
    let mut nodes = Vec::new();
    grow(x, y, (0..x.len()).collect(), 0, min_samples_leaf, max_depth, &mut nodes);
    nodes
}

fn gini_of(samples: &[usize], y: &[u8]) -> f64 {
    let n = samples.len() as f64;
    let ones = samples.iter().filter(|&&i| y[i] == 1).count() as f64;
    let (p0, p1) = ((n - ones) / n, ones / n);
    1.0 - p0 * p0 - p1 * p1
}

fn grow(
    x: &[Vec<f64>],
    y: &[u8],
    samples: Vec<usize>,
    depth: usize,
    msl: usize,
    max_depth: Option<usize>,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let ones = samples.iter().filter(|&&i| y[i] == 1).count();
    nodes.push(Node::Leaf {
        counts: [samples.len() - ones, ones],
    });
    if ones == 0 || ones == samples.len() || max_depth.is_some_and(|d| depth >= d) {
        return id;
    }
    let parent = gini_of(&samples, y);
    let mut best: Option<(f64, usize, f64)> = None;
    for feat in 0..x[0].len() {
        let mut values: Vec<f64> = samples.iter().map(|&i| x[i][feat]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let thr = if thr < w[1] { thr } else { w[0] };
            let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x[i][feat] <= thr);
            if l.len() < msl || r.len() < msl {
                continue;
            }
            let n = samples.len() as f64;
            let weighted = l.len() as f64 / n * gini_of(&l, y) + r.len() as f64 / n * gini_of(&r, y);
            if best.is_none_or(|(b, _, _)| weighted < b - 1e-12) {
                best = Some((weighted, feat, thr));
            }
        }
    }
    let Some((weighted, feat, thr)) = best else {
        return id;
    };
    if !(weighted < parent - 1e-12) {
        return id;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| x[i][feat] <= thr);
    let left = grow(x, y, l, depth + 1, msl, max_depth, nodes);
    let right = grow(x, y, r, depth + 1, msl, max_depth, nodes);
    nodes[id] = Node::Split { feat, thr, left, right };
    id
}

/// Small labelled data set with values on a coarse grid, so ties in both
/// values and impurity occur.
pub fn forest_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0..6) as f64 * 0.5).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if y.contains(&0) && y.contains(&1) {
            return (x, y);
        }
    }
}

pub struct GradientCheck {
    pub checked: usize,
    pub skipped_kink: usize,
    pub max_relative_error: f64,
}

/// Compares analytic gradients against central differences for `samples`
/// random parameters, alternating between a similar and a dissimilar pair.
pub fn gradient_check(seed: u64, samples: usize, h: f64) -> GradientCheck {
    let mut rng = styleprint_core::seed::rng_for(seed, "gradient-check");
    let mut model = EncoderModel::init(&[8, 4, 2], seed).unwrap();
    // Nonzero biases so no unit sits exactly on a ReLU kink.
    for i in 0..model.n_params() {
        let v = model.param(i) + rng.random_range(-0.1..0.1);
        model.set_param(i, v);
    }
    let mut out = GradientCheck {
        checked: 0,
        skipped_kink: 0,
        max_relative_error: 0.0,
    };
    for s in 0..samples {
        let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (s % 2) as u8;
        let d = styleprint_core::vecmath::euclidean_distance(&model.encode(&a).unwrap(), &model.encode(&b).unwrap())
            .unwrap();
        // Dissimilar pairs get a margin that keeps the hinge active.
        let margin = if y == 1 { d * rng.random_range(1.2..2.0) + 0.01 } else { 1.0 };
        if (margin - d).abs() <= 1e-3 {
            out.skipped_kink += 1;
            continue;
        }
        let grads = loss_gradient(&model, &a, &b, y, margin).unwrap();
        let p = rng.random_range(0..model.n_params());
        let original = model.param(p);
        model.set_param(p, original + h);
        let up = pair_loss(&model, &a, &b, y, margin).unwrap();
        model.set_param(p, original - h);
        let down = pair_loss(&model, &a, &b, y, margin).unwrap();
        model.set_param(p, original);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get(p);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        out.max_relative_error = out.max_relative_error.max(rel);
        out.checked += 1;
    }
    out
}

fn embedded(id: String, source: Source, v: Vec<f64>) -> EmbeddedText {
    EmbeddedText {
        record: TextRecord {
            id,
            speaker: "spk".into(),
            language: "en".into(),
            text: "t".into(),
            source,
        },
        embedding: v,
    }
}

/// Items and a hand-built clustering from per-cluster (speaker, external)
/// counts. Vectors are arbitrary nonzero directions.
pub fn composition(counts: &[(usize, usize)], angles: &[f64]) -> (Vec<EmbeddedText>, ClusterResult) {
    let mut items = Vec::new();
    let mut labels = Vec::new();
    let mut k = 0;
    for (c, &(spk, ext)) in counts.iter().enumerate() {
        for j in 0..spk + ext {
            let a = angles[k % angles.len()] + c as f64;
            let source = if j < spk { Source::Speaker } else { Source::External };
            items.push(embedded(format!("c{c:02}-{j:03}"), source, vec![a.cos(), a.sin(), 0.5]));
            labels.push(c);
            k += 1;
        }
    }
    let clusters = ClusterResult {
        ids: items.iter().map(|i| i.id().to_string()).collect(),
        labels,
        centroids: vec![vec![0.0; 3]; counts.len()],
        radii: vec![0.0; counts.len()],
        merge_log: vec![],
    };
    (items, clusters)
}
