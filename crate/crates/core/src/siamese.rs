//! Shared-weight feed-forward encoder trained with a contrastive loss.
//!
//! One parameter set encodes both members of a pair. The loss for a pair at
//! latent distance `D` with label `y` (0 similar, 1 dissimilar) is
//!
//! ```text
//! L = (1 - y) * D^2 / 2 + y * max(0, m - D)^2 / 2
//! ```
//!
//! Hidden layers use ReLU, the output layer is linear, and distances are
//! Euclidean in the unnormalized latent space.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PairRecord;
use crate::error::{Error, Result};
use crate::forest::{classification_report, BinaryReport};
use crate::seed::rng_for;

pub fn contrastive_loss(y: u8, d: f64, margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::InvalidMargin(margin));
    }
    Ok(loss_unchecked(y, d, margin))
}

fn loss_unchecked(y: u8, d: f64, margin: f64) -> f64 {
    if y == 0 {
        0.5 * d * d
    } else {
        let h = (margin - d).max(0.0);
        0.5 * h * h
    }
}

/// dL/dD. At the hinge kink `D == m` the one-sided value 0 is used.
fn loss_slope(y: u8, d: f64, margin: f64) -> f64 {
    if y == 0 {
        d
    } else {
        -(margin - d).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    layer_dims: Vec<usize>,
    /// `weights[l]` has shape `(layer_dims[l], layer_dims[l + 1])`.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Per-layer parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(model: &EncoderModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Flat-index access in [`EncoderModel::param`] order.
    pub fn get(&self, index: usize) -> f64 {
        let (layer, is_bias, offset) = locate(&self.weights, &self.biases, index);
        if is_bias {
            self.biases[layer][offset]
        } else {
            let cols = self.weights[layer].ncols();
            self.weights[layer][[offset / cols, offset % cols]]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&x| x == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&x| x == 0.0))
    }
}

fn locate(weights: &[Array2<f64>], biases: &[Array1<f64>], mut index: usize) -> (usize, bool, usize) {
    for (l, (w, b)) in weights.iter().zip(biases).enumerate() {
        if index < w.len() {
            return (l, false, index);
        }
        index -= w.len();
        if index < b.len() {
            return (l, true, index);
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

struct Trace {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Array2<f64>>,
}

impl EncoderModel {
    /// Xavier-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::ConfigInvalid(
                "encoder needs at least two positive layer sizes".into(),
            ));
        }
        let mut rng = rng_for(seed, "siamese/init");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-limit..limit)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a model from explicit parameters; `weights[l]` is row-major
    /// with `layer_dims[l]` rows.
    pub fn from_parts(layer_dims: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if layer_dims.len() < 2 || weights.len() != layer_dims.len() - 1 || biases.len() != weights.len() {
            return Err(Error::ConfigInvalid("layer count does not match parameters".into()));
        }
        let mut ws = Vec::new();
        let mut bs = Vec::new();
        for (l, (w, b)) in weights.into_iter().zip(biases).enumerate() {
            let (rows, cols) = (layer_dims[l], layer_dims[l + 1]);
            if b.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: b.len() });
            }
            let w = Array2::from_shape_vec((rows, cols), w).map_err(|_| {
                Error::ConfigInvalid(format!("layer {l} weights do not form a {rows}x{cols} matrix"))
            })?;
            if !w.iter().chain(&b).all(|x| x.is_finite()) {
                return Err(Error::NonFinite);
            }
            ws.push(w);
            bs.push(Array1::from(b));
        }
        Ok(Self {
            layer_dims,
            weights: ws,
            biases: bs,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Row-major weights per layer.
    pub fn weights_row_major(&self) -> Vec<Vec<f64>> {
        self.weights.iter().map(|w| w.iter().copied().collect()).collect()
    }

    pub fn biases(&self) -> Vec<Vec<f64>> {
        self.biases.iter().map(|b| b.to_vec()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>() + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    /// Flat parameter order: layer by layer, weights row-major then bias.
    pub fn param(&self, index: usize) -> f64 {
        let (layer, is_bias, offset) = locate(&self.weights, &self.biases, index);
        if is_bias {
            self.biases[layer][offset]
        } else {
            let cols = self.weights[layer].ncols();
            self.weights[layer][[offset / cols, offset % cols]]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (layer, is_bias, offset) = locate(&self.weights, &self.biases, index);
        if is_bias {
            self.biases[layer][offset] = value;
        } else {
            let cols = self.weights[layer].ncols();
            self.weights[layer][[offset / cols, offset % cols]] = value;
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    fn forward_trace(&self, x: Array2<f64>) -> (Array2<f64>, Trace) {
        let last = self.weights.len() - 1;
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.weights.len()),
            pre: Vec::with_capacity(self.weights.len()),
        };
        let mut h = x;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = h.dot(w) + b;
            trace.inputs.push(h);
            h = if l < last { z.mapv(|v| v.max(0.0)) } else { z.clone() };
            trace.pre.push(z);
        }
        (h, trace)
    }

    fn backward(&self, trace: &Trace, d_out: Array2<f64>) -> Gradients {
        let n = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_out;
        for l in (0..n).rev() {
            if l < n - 1 {
                Zip::from(&mut delta).and(&trace.pre[l]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            grads.weights[l] = trace.inputs[l].t().dot(&delta);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l].t());
            }
        }
        grads
    }

    /// Encodes each row of `x`.
    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.weights.len() - 1;
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(w) + b;
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, v.len()), v).expect("row vector shape");
        Ok(self.encode_batch(x)?.row(0).to_vec())
    }
}

fn row_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean loss over a batch of pairs and its gradient. Both branches run as
/// one stacked batch, so their gradients accumulate into the same
/// parameters.
fn batch_loss_grad(
    model: &EncoderModel,
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    labels: &[u8],
    margin: f64,
) -> (f64, Gradients) {
    let n = labels.len();
    let x = concatenate![Axis(0), a, b];
    let (out, trace) = model.forward_trace(x);
    let (la, lb) = (out.slice(s![..n, ..]), out.slice(s![n.., ..]));
    let mut d_out = Array2::zeros(out.raw_dim());
    let mut total = 0.0;
    for i in 0..n {
        let diff = &la.row(i) - &lb.row(i);
        let d = diff.dot(&diff).sqrt();
        total += loss_unchecked(labels[i], d, margin);
        if d > 0.0 {
            let g = diff * (loss_slope(labels[i], d, margin) / d / n as f64);
            d_out.row_mut(i).assign(&g);
            d_out.row_mut(n + i).assign(&(-g));
        }
    }
    (total / n as f64, model.backward(&trace, d_out))
}

/// Loss of a single pair.
pub fn pair_loss(model: &EncoderModel, a: &[f64], b: &[f64], y: u8, margin: f64) -> Result<f64> {
    let d = crate::vecmath::euclidean_distance(&model.encode(a)?, &model.encode(b)?)?;
    contrastive_loss(y, d, margin)
}

/// Parameter gradients of a single pair's loss.
pub fn loss_gradient(model: &EncoderModel, a: &[f64], b: &[f64], y: u8, margin: f64) -> Result<Gradients> {
    if !(margin > 0.0) {
        return Err(Error::InvalidMargin(margin));
    }
    model.check_input(a.len())?;
    model.check_input(b.len())?;
    let a = ArrayView2::from_shape((1, a.len()), a).expect("row vector shape");
    let b = ArrayView2::from_shape((1, b.len()), b).expect("row vector shape");
    Ok(batch_loss_grad(model, a, b, &[y], margin).1)
}

/// Predicted label and latent distance; `0` iff the distance is below `tau`.
pub fn classify_pair(model: &EncoderModel, a: &[f64], b: &[f64], tau: f64) -> Result<(u8, f64)> {
    let d = crate::vecmath::euclidean_distance(&model.encode(a)?, &model.encode(b)?)?;
    Ok((u8::from(d >= tau), d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &EncoderModel, lr: f64, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            lr,
            t: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut EncoderModel, grads: &Gradients) {
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut model.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Layer sizes after the input layer.
    pub layers: Vec<usize>,
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Decision threshold on latent distance; `None` means `margin / 2`.
    pub threshold: Option<f64>,
    /// Also present every training pair with its members swapped.
    pub both_orders: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: vec![512, 256, 128],
            margin: 1.0,
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: AdamConfig::default(),
            seed: 0,
            threshold: None,
            both_orders: false,
        }
    }
}

impl TrainConfig {
    pub fn tau(&self) -> f64 {
        self.threshold.unwrap_or(self.margin / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return Err(Error::InvalidMargin(self.margin));
        }
        let tau = self.tau();
        if !(tau > 0.0 && tau < self.margin) {
            return Err(Error::ConfigInvalid(format!(
                "threshold {tau} must lie in (0, margin)"
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::ConfigInvalid("epochs and batch_size must be positive".into()));
        }
        if self.layers.is_empty() || self.layers.contains(&0) {
            return Err(Error::ConfigInvalid("layers must be nonempty and positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::ConfigInvalid("learning_rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Pair members stacked row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub labels: Vec<u8>,
}

impl PairData {
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = &'a PairRecord>,
        embeddings: &HashMap<&str, &[f64]>,
    ) -> Result<Self> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for p in pairs {
            for (id, out) in [(&p.a, &mut a), (&p.b, &mut b)] {
                let v = embeddings.get(id.as_str()).ok_or_else(|| {
                    Error::InconsistentInput(format!("pair member `{id}` has no embedding"))
                })?;
                let expected = *dim.get_or_insert(v.len());
                if v.len() != expected {
                    return Err(Error::DimensionMismatch { expected, actual: v.len() });
                }
                out.extend_from_slice(v);
            }
            labels.push(p.label);
        }
        let dim = dim.unwrap_or(0);
        let n = labels.len();
        Ok(Self {
            a: Array2::from_shape_vec((n, dim), a).expect("row-major pair data"),
            b: Array2::from_shape_vec((n, dim), b).expect("row-major pair data"),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
            labels: self.labels.clone(),
        }
    }

    fn append(&mut self, other: &Self) {
        self.a = concatenate![Axis(0), self.a, other.a];
        self.b = concatenate![Axis(0), self.b, other.b];
        self.labels.extend_from_slice(&other.labels);
    }
}

/// Latent distance of every pair.
pub fn pair_distances(model: &EncoderModel, data: &PairData) -> Result<Vec<f64>> {
    let la = model.encode_batch(data.a.view())?;
    let lb = model.encode_batch(data.b.view())?;
    Ok(la.outer_iter().zip(lb.outer_iter()).map(|(x, y)| row_distance(x, y)).collect())
}

pub fn predict_at(distances: &[f64], tau: f64) -> Vec<u8> {
    distances.iter().map(|&d| u8::from(d >= tau)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub loss: f64,
    pub threshold: f64,
    pub report: BinaryReport,
}

/// Mean loss and classification metrics (label 1 positive) at `tau`.
pub fn evaluate(model: &EncoderModel, data: &PairData, margin: f64, tau: f64) -> Result<PairEvaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no pairs to evaluate".into()));
    }
    let distances = pair_distances(model, data)?;
    let loss = distances
        .iter()
        .zip(&data.labels)
        .map(|(&d, &y)| contrastive_loss(y, d, margin))
        .sum::<Result<f64>>()?
        / data.len() as f64;
    let report = classification_report(&data.labels, &predict_at(&distances, tau))?;
    Ok(PairEvaluation {
        loss,
        threshold: tau,
        report,
    })
}

/// Threshold in `(0, margin)` maximising F1 on `data`. Candidates are the
/// midpoints between consecutive distinct distances plus `margin / 2`;
/// ties go to the smallest threshold.
pub fn tune_threshold(model: &EncoderModel, data: &PairData, margin: f64) -> Result<f64> {
    let distances = pair_distances(model, data)?;
    let mut sorted = distances.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    candidates.push(margin / 2.0);
    candidates.retain(|&t| t > 0.0 && t < margin);
    candidates.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, margin / 2.0);
    for tau in candidates {
        let f1 = classification_report(&data.labels, &predict_at(&distances, tau))?.f1;
        if f1 > best.0 {
            best = (f1, tau);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_recall: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were retained.
    pub best_epoch: usize,
    pub tuned_threshold: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_recall: Option<f64>,
}

impl TrainHistory {
    /// Loss curve as CSV: `epoch,train_loss,val_loss,recall`.
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,recall\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_recall));
        }
        out
    }
}

/// Mini-batch training with Adam. Returns the parameters of the epoch with
/// the lowest validation loss (earliest on ties).
pub fn train(train: &PairData, val: &PairData, cfg: &TrainConfig) -> Result<(EncoderModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation split is empty".into()));
    }
    if val.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            actual: val.dim(),
        });
    }
    let mut data = train.clone();
    if cfg.both_orders {
        data.append(&train.swapped());
    }
    let mut dims = vec![data.dim()];
    dims.extend(&cfg.layers);
    let mut model = EncoderModel::init(&dims, cfg.seed)?;
    let mut adam = Adam::new(&model, cfg.learning_rate, cfg.optimizer);
    let mut rng = rng_for(cfg.seed, "siamese/shuffle");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, EncoderModel)> = None;
    let tau = cfg.tau();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let a = data.a.select(Axis(0), chunk);
            let b = data.b.select(Axis(0), chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (loss, grads) = batch_loss_grad(&model, a.view(), b.view(), &labels, cfg.margin);
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            adam.step(&mut model, &grads);
            batch_losses.push(loss);
        }
        let train_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        let eval = evaluate(&model, val, cfg.margin, tau)?;
        if !eval.loss.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        log::debug!("epoch {epoch}: train {train_loss:.5} val {:.5}", eval.loss);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: eval.loss,
            val_recall: eval.report.recall,
            val_accuracy: eval.report.accuracy,
        });
        if best.as_ref().is_none_or(|(l, _)| eval.loss < *l) {
            best = Some((eval.loss, model.clone()));
            history.best_epoch = epoch;
        }
    }
    let (_, model) = best.expect("at least one epoch");
    Ok((model, history))
}

/// Serialized encoder with its training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    /// Row-major, `layer_dims[l]` rows by `layer_dims[l + 1]` columns.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub config: TrainConfig,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn new(model: &EncoderModel, config: TrainConfig, history: TrainHistory) -> Self {
        Self {
            layer_dims: model.layer_dims.clone(),
            weights: model.weights_row_major(),
            biases: model.biases(),
            config,
            history,
        }
    }

    pub fn model(&self) -> Result<EncoderModel> {
        EncoderModel::from_parts(self.layer_dims.clone(), self.weights.clone(), self.biases.clone())
    }

    /// Decision threshold: the tuned one when present.
    pub fn threshold(&self) -> f64 {
        self.history.tuned_threshold.unwrap_or(self.config.tau())
    }
}
