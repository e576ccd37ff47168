//! In-memory stage computations. The file-based runners in
//! [`crate::pipeline`] wrap these with artifact I/O.

use std::collections::HashMap;

use styleprint_core::corpus::{EmbeddingRecord, PairRecord, TextRecord};
use styleprint_core::forest::{
    classification_report, pair_features, train_forest, BinaryReport, ForestConfig, ForestModel,
};
use styleprint_core::pairs::{
    build_triplets, split_pairs, triplets_to_pairs, LabeledItem, PairSet, SplitConfig, Splits, TripletSet,
};
use styleprint_core::siamese::{evaluate, train, tune_threshold, Checkpoint, EncoderModel, PairData, TrainConfig};
use styleprint_core::{Error, Result};

pub fn embedding_map(records: &[EmbeddingRecord]) -> HashMap<&str, &[f64]> {
    records.iter().map(|e| (e.id.as_str(), e.vector.as_slice())).collect()
}

#[derive(Debug, Clone)]
pub struct PairStage {
    pub triplets: TripletSet,
    pub pairs: PairSet,
    pub splits: Splits,
}

/// Triplets, balanced pairs and splits for the surviving records.
pub fn make_pairs(
    kept: &[TextRecord],
    assignment: &HashMap<&str, usize>,
    seed: u64,
    split: &SplitConfig,
) -> Result<PairStage> {
    let items = kept
        .iter()
        .map(|r| {
            let &cluster = assignment
                .get(r.id.as_str())
                .ok_or_else(|| Error::InconsistentInput(format!("item `{}` has no cluster", r.id)))?;
            Ok(LabeledItem {
                id: r.id.clone(),
                speaker: r.speaker.clone(),
                cluster,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let triplets = build_triplets(&items, seed)?;
    let pairs = triplets_to_pairs(&triplets.triplets, seed)?;
    let splits = split_pairs(&pairs.pairs, &SplitConfig { seed, ..split.clone() })?;
    Ok(PairStage {
        triplets,
        pairs,
        splits,
    })
}

pub fn pair_data(pairs: &[PairRecord], indices: &[usize], embeddings: &HashMap<&str, &[f64]>) -> Result<PairData> {
    PairData::from_pairs(indices.iter().map(|&i| &pairs[i]), embeddings)
}

/// Trains the encoder on the train split, tunes the threshold on the
/// validation split and records test loss and recall in the history.
pub fn train_encoder(
    pairs: &[PairRecord],
    splits: &Splits,
    embeddings: &HashMap<&str, &[f64]>,
    cfg: &TrainConfig,
) -> Result<(EncoderModel, Checkpoint)> {
    let train_data = pair_data(pairs, &splits.train, embeddings)?;
    let val_data = pair_data(pairs, &splits.val, embeddings)?;
    let test_data = pair_data(pairs, &splits.test, embeddings)?;
    let (model, mut history) = train(&train_data, &val_data, cfg)?;
    let tau = tune_threshold(&model, &val_data, cfg.margin)?;
    let test = evaluate(&model, &test_data, cfg.margin, tau)?;
    history.tuned_threshold = Some(tau);
    history.test_loss = Some(test.loss);
    history.test_recall = Some(test.report.recall);
    let checkpoint = Checkpoint::new(&model, cfg.clone(), history);
    Ok((model, checkpoint))
}

/// Forest input features of the encoded pairs at `indices`.
pub fn latent_features(
    model: &EncoderModel,
    pairs: &[PairRecord],
    indices: &[usize],
    embeddings: &HashMap<&str, &[f64]>,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let data = pair_data(pairs, indices, embeddings)?;
    if data.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let a = model.encode_batch(data.a.view())?;
    let b = model.encode_batch(data.b.view())?;
    let features = a
        .outer_iter()
        .zip(b.outer_iter())
        .map(|(x, y)| pair_features(&x.to_vec(), &y.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((features, data.labels))
}

pub fn train_pair_forest(
    model: &EncoderModel,
    pairs: &[PairRecord],
    splits: &Splits,
    embeddings: &HashMap<&str, &[f64]>,
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    let (x, y) = latent_features(model, pairs, &splits.train, embeddings)?;
    train_forest(&x, &y, cfg)
}

pub fn forest_report(
    model: &EncoderModel,
    forest: &ForestModel,
    pairs: &[PairRecord],
    indices: &[usize],
    embeddings: &HashMap<&str, &[f64]>,
) -> Result<BinaryReport> {
    let (x, y) = latent_features(model, pairs, indices, embeddings)?;
    let predicted = x.iter().map(|f| forest.predict(f)).collect::<Result<Vec<u8>>>()?;
    classification_report(&y, &predicted)
}
