//! File-based stage runners. Every stage reads its inputs by role, writes
//! its artifacts into the output directory and records a manifest with
//! content hashes of everything it read and wrote.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use styleprint_core::augment::{augment, quality_report};
use styleprint_core::cluster::{agglomerate, cluster_stats, ClusterResult};
use styleprint_core::corpus::{
    join_embeddings, read_jsonl, write_jsonl, ClusterRecord, EmbeddedText, EmbeddingRecord, JsonlRecord,
    PairRecord, ProfileRecord, TextRecord,
};
use styleprint_core::embedder::{build_provider, embed_records, synth_generate, TruthRecord};
use styleprint_core::forest::{ForestModel, MetricsTable};
use styleprint_core::pairs::Splits;
use styleprint_core::profile::{build_profiles, encode_items, export_profiles_projection, rank_candidates, POOLED};
use styleprint_core::seed::derive_seed;
use styleprint_core::siamese::Checkpoint;
use styleprint_core::{Error, Result};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages;

/// Artifact roles and their default file names. A role may be pointed
/// elsewhere with `--input role=path` or the config's `inputs` table.
pub const ARTIFACTS: &[(&str, &str)] = &[
    ("corpus", "corpus.jsonl"),
    ("embeddings", "embeddings.jsonl"),
    ("truth", "truth.jsonl"),
    ("clusters", "clusters.jsonl"),
    ("clusters_meta", "clusters-meta.json"),
    ("augmented", "augmented.jsonl"),
    ("augment_report", "augment-report.json"),
    ("pairs", "pairs.jsonl"),
    ("splits", "splits.json"),
    ("snn", "snn.json"),
    ("loss_curve", "loss-curve.csv"),
    ("forest", "forest.json"),
    ("metrics", "metrics.json"),
    ("profiles", "profiles.jsonl"),
    ("profiles_audit", "profiles-audit.json"),
    ("projection", "projection.csv"),
    ("ranking", "ranking.json"),
    ("candidates", "corpus.jsonl"),
];

pub fn default_file(role: &str) -> Option<&'static str> {
    ARTIFACTS.iter().find(|(r, _)| *r == role).map(|(_, f)| *f)
}

/// Role whose default file name is `name`; the first match wins, so
/// `corpus.jsonl` means the corpus rather than the candidates.
pub fn role_for_file(name: &str) -> Option<&'static str> {
    ARTIFACTS.iter().find(|(_, f)| *f == name).map(|(r, _)| *r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Embed,
    Cluster,
    Augment,
    Pairs,
    TrainSnn,
    TrainRfc,
    Eval,
    Profile,
    Rank,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Augment => "augment",
            Stage::Pairs => "pairs",
            Stage::TrainSnn => "train-snn",
            Stage::TrainRfc => "train-rfc",
            Stage::Eval => "eval",
            Stage::Profile => "profile",
            Stage::Rank => "rank",
        }
    }
}

pub struct Context {
    pub config: PipelineConfig,
    pub output: PathBuf,
}

impl Context {
    pub fn new(config: PipelineConfig, output: impl Into<PathBuf>) -> Self {
        Self {
            config,
            output: output.into(),
        }
    }

    pub fn input_path(&self, role: &str) -> PathBuf {
        match self.config.inputs.get(role) {
            Some(p) => p.clone(),
            None => self.output_path(role),
        }
    }

    pub fn output_path(&self, role: &str) -> PathBuf {
        self.output.join(default_file(role).expect("known artifact role"))
    }

    /// Seed of a stage's random streams.
    pub fn stage_seed(&self, stage: Stage) -> u64 {
        derive_seed(self.config.seed, stage.name())
    }

    pub fn run(&self, stage: Stage) -> std::result::Result<(), CliError> {
        let mut run = StageRun {
            ctx: self,
            stage,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        let config = match stage {
            Stage::Synth => synth(&mut run),
            Stage::Embed => embed(&mut run),
            Stage::Cluster => cluster(&mut run),
            Stage::Augment => augment_stage(&mut run),
            Stage::Pairs => pairs(&mut run),
            Stage::TrainSnn => train_snn(&mut run),
            Stage::TrainRfc => train_rfc(&mut run),
            Stage::Eval => eval(&mut run),
            Stage::Profile => profile(&mut run),
            Stage::Rank => rank(&mut run),
        }
        .and_then(|config| run.finish(config));
        config.map_err(|source| CliError::Stage {
            stage: stage.name(),
            source,
        })
    }

    /// Every stage in order. A corpus given explicitly is embedded;
    /// otherwise a synthetic corpus with its embeddings is generated.
    pub fn run_pipeline(&self) -> std::result::Result<(), CliError> {
        let first = if self.config.inputs.contains_key("corpus") {
            Stage::Embed
        } else {
            Stage::Synth
        };
        for stage in [
            first,
            Stage::Cluster,
            Stage::Augment,
            Stage::Pairs,
            Stage::TrainSnn,
            Stage::TrainRfc,
            Stage::Eval,
            Stage::Profile,
            Stage::Rank,
        ] {
            log::info!("running stage {}", stage.name());
            self.run(stage)?;
        }
        Ok(())
    }
}

struct StageRun<'a> {
    ctx: &'a Context,
    stage: Stage,
    inputs: BTreeMap<&'static str, PathBuf>,
    outputs: BTreeMap<&'static str, PathBuf>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    }
}

impl StageRun<'_> {
    fn seed(&self) -> u64 {
        self.ctx.stage_seed(self.stage)
    }

    fn cfg(&self) -> &PipelineConfig {
        &self.ctx.config
    }

    fn input(&mut self, role: &'static str) -> PathBuf {
        let path = self.ctx.input_path(role);
        self.inputs.insert(role, path.clone());
        path
    }

    fn read<R: JsonlRecord>(&mut self, role: &'static str) -> Result<Vec<R>> {
        let path = self.input(role);
        read_jsonl(&path)
    }

    fn read_json<T: DeserializeOwned>(&mut self, role: &'static str) -> Result<T> {
        let path = self.input(role);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| json_error(&path, e))
    }

    fn output(&mut self, role: &'static str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.ctx.output).map_err(|e| Error::Io {
            path: self.ctx.output.clone(),
            source: e,
        })?;
        let path = self.ctx.output_path(role);
        self.outputs.insert(role, path.clone());
        Ok(path)
    }

    fn write<R: JsonlRecord>(&mut self, role: &'static str, records: &[R]) -> Result<()> {
        let path = self.output(role)?;
        write_jsonl(&path, records)
    }

    fn write_text(&mut self, role: &'static str, text: &str) -> Result<()> {
        let path = self.output(role)?;
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }

    fn write_json<T: Serialize>(&mut self, role: &'static str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InconsistentInput(e.to_string()))?;
        text.push('\n');
        self.write_text(role, &text)
    }

    fn embedded(&mut self, records_role: &'static str) -> Result<Vec<EmbeddedText>> {
        let records: Vec<TextRecord> = self.read(records_role)?;
        let embeddings: Vec<EmbeddingRecord> = self.read("embeddings")?;
        join_embeddings(&records, &embeddings)
    }

    fn encoder(&mut self) -> Result<Checkpoint> {
        self.read_json("snn")
    }

    /// Writes `manifest-<stage>.json`. No timestamps, so reruns are
    /// byte-identical.
    fn finish(self, config: Value) -> Result<()> {
        // Paths inside the output directory are recorded relative to it.
        let shown = |p: &Path| p.strip_prefix(&self.ctx.output).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        let describe = |files: &BTreeMap<&'static str, PathBuf>| -> Result<Value> {
            let mut out = serde_json::Map::new();
            for (role, path) in files {
                out.insert(
                    role.to_string(),
                    json!({ "path": shown(path).display().to_string(), "sha256": sha256_file(path)? }),
                );
            }
            Ok(Value::Object(out))
        };
        let manifest = json!({
            "stage": self.stage.name(),
            "root_seed": self.ctx.config.seed,
            "stage_seed": self.seed(),
            "inputs": describe(&self.inputs)?,
            "outputs": describe(&self.outputs)?,
            "config": config,
        });
        let path = self.ctx.output.join(format!("manifest-{}.json", self.stage.name()));
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }
}

fn echo<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("config serializes")
}

fn synth(run: &mut StageRun) -> Result<Value> {
    let mut cfg = run.cfg().synth.clone();
    cfg.seed = run.seed();
    let out = synth_generate(&cfg)?;
    let embeddings: Vec<EmbeddingRecord> = out
        .embeddings
        .iter()
        .map(|e| EmbeddingRecord {
            id: e.id().to_string(),
            vector: e.embedding.clone(),
        })
        .collect();
    run.write("corpus", &out.corpus)?;
    run.write("embeddings", &embeddings)?;
    run.write("truth", &out.truth)?;
    Ok(echo(&cfg))
}

fn embed(run: &mut StageRun) -> Result<Value> {
    let cfg = run.cfg().embedder.clone();
    let budget = run.cfg().corpus.token_budget;
    let records: Vec<TextRecord> = run.read("corpus")?;
    if let Some(fixture) = &cfg.fixture_path {
        run.inputs.insert("fixture", fixture.clone());
    }
    let provider = build_provider(&cfg, run.seed())?;
    let embeddings = embed_records(provider.as_ref(), &records, budget)?;
    run.write("embeddings", &embeddings)?;
    Ok(json!({ "embedder": cfg, "token_budget": budget }))
}

fn cluster(run: &mut StageRun) -> Result<Value> {
    let cfg = run.cfg().cluster.clone();
    let items = run.embedded("corpus")?;
    let result = agglomerate(&items, &cfg)?;
    let stats = cluster_stats(&result, &items)?;
    log::info!("{} items in {} clusters", items.len(), result.n_clusters());
    run.write("clusters", &result.to_records())?;
    run.write_json(
        "clusters_meta",
        &json!({
            "n_clusters": result.n_clusters(),
            "radii": result.radii,
            "centroids": result.centroids,
            "merge_log": result.merge_log,
            "stats": stats,
        }),
    )?;
    Ok(echo(&cfg))
}

fn augment_stage(run: &mut StageRun) -> Result<Value> {
    let cfg = run.cfg().augment.clone();
    let items = run.embedded("corpus")?;
    let records: Vec<ClusterRecord> = run.read("clusters")?;
    let clusters = ClusterResult::from_records(&records, &items, &run.cfg().cluster)?;
    let report = augment(&items, &clusters, &cfg)?;
    // The truth table only exists for synthetic corpora.
    let truth_path = run.ctx.input_path("truth");
    let truth: Option<Vec<TruthRecord>> = if truth_path.exists() { Some(run.read("truth")?) } else { None };
    let quality = quality_report(&report, truth.as_deref());
    let kept: Vec<TextRecord> = report.filter(&items).into_iter().map(|i| i.record.clone()).collect();
    run.write("augmented", &kept)?;
    run.write_json("augment_report", &json!({ "quality": quality, "report": report }))?;
    Ok(echo(&cfg))
}

#[derive(Serialize, serde::Deserialize)]
struct SplitsFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    /// Indices dropped to balance labels before splitting.
    downsampled: Vec<usize>,
    triplets: usize,
    skipped_anchors: usize,
    duplicates_removed: usize,
    balance_dropped: usize,
}

impl SplitsFile {
    fn splits(&self) -> Splits {
        Splits {
            train: self.train.clone(),
            val: self.val.clone(),
            test: self.test.clone(),
            downsampled: self.downsampled.clone(),
        }
    }
}

fn pairs(run: &mut StageRun) -> Result<Value> {
    let mut cfg = run.cfg().pairs.clone();
    cfg.seed = run.seed();
    let kept: Vec<TextRecord> = run.read("augmented")?;
    let records: Vec<ClusterRecord> = run.read("clusters")?;
    let assignment: HashMap<&str, usize> = records.iter().map(|r| (r.id.as_str(), r.cluster)).collect();
    let out = stages::make_pairs(&kept, &assignment, cfg.seed, &cfg)?;
    log::info!(
        "{} triplets, {} pairs ({} train, {} val, {} test)",
        out.triplets.triplets.len(),
        out.pairs.pairs.len(),
        out.splits.train.len(),
        out.splits.val.len(),
        out.splits.test.len()
    );
    run.write("pairs", &out.pairs.pairs)?;
    run.write_json(
        "splits",
        &SplitsFile {
            train: out.splits.train,
            val: out.splits.val,
            test: out.splits.test,
            downsampled: out.splits.downsampled,
            triplets: out.triplets.triplets.len(),
            skipped_anchors: out.triplets.skipped,
            duplicates_removed: out.pairs.duplicates_removed,
            balance_dropped: out.pairs.downsampled,
        },
    )?;
    Ok(echo(&cfg))
}

fn train_snn(run: &mut StageRun) -> Result<Value> {
    let mut cfg = run.cfg().siamese.clone();
    cfg.seed = run.seed();
    let pairs: Vec<PairRecord> = run.read("pairs")?;
    let splits: SplitsFile = run.read_json("splits")?;
    let embeddings: Vec<EmbeddingRecord> = run.read("embeddings")?;
    let map = stages::embedding_map(&embeddings);
    let (_, checkpoint) = stages::train_encoder(&pairs, &splits.splits(), &map, &cfg)?;
    let h = &checkpoint.history;
    log::info!(
        "best epoch {}, tuned threshold {:?}, test loss {:?}, test recall {:?}",
        h.best_epoch,
        h.tuned_threshold,
        h.test_loss,
        h.test_recall
    );
    run.write_text("loss_curve", &h.loss_curve_csv())?;
    run.write_json("snn", &checkpoint)?;
    Ok(echo(&cfg))
}

fn train_rfc(run: &mut StageRun) -> Result<Value> {
    let mut cfg = run.cfg().forest.clone();
    cfg.seed = run.seed();
    let pairs: Vec<PairRecord> = run.read("pairs")?;
    let splits: SplitsFile = run.read_json("splits")?;
    let embeddings: Vec<EmbeddingRecord> = run.read("embeddings")?;
    let model = run.encoder()?.model()?;
    let map = stages::embedding_map(&embeddings);
    let forest = stages::train_pair_forest(&model, &pairs, &splits.splits(), &map, &cfg)?;
    run.write_json("forest", &forest)?;
    Ok(echo(&cfg))
}

fn eval(run: &mut StageRun) -> Result<Value> {
    let pairs: Vec<PairRecord> = run.read("pairs")?;
    let splits: SplitsFile = run.read_json("splits")?;
    let embeddings: Vec<EmbeddingRecord> = run.read("embeddings")?;
    let model = run.encoder()?.model()?;
    let forest: ForestModel = run.read_json("forest")?;
    let map = stages::embedding_map(&embeddings);
    let val = stages::forest_report(&model, &forest, &pairs, &splits.val, &map)?;
    let test = stages::forest_report(&model, &forest, &pairs, &splits.test, &map)?;
    run.write_json("metrics", &MetricsTable::new(&val, &test))?;
    Ok(Value::Null)
}

fn profile(run: &mut StageRun) -> Result<Value> {
    let cfg = run.cfg().profile.clone();
    let items = run.embedded("augmented")?;
    let model = run.encoder()?.model()?;
    let forest: Option<ForestModel> = if cfg.forest_gate { Some(run.read_json("forest")?) } else { None };
    let refs: Vec<&EmbeddedText> = items.iter().collect();
    let profiles = build_profiles(&model, forest.as_ref(), &refs, &cfg)?;
    let records: Vec<ProfileRecord> = profiles.iter().map(|p| p.to_record()).collect();
    run.write("profiles", &records)?;
    let audit: Vec<Value> = profiles
        .iter()
        .map(|p| {
            json!({
                "speaker": p.speaker,
                "language": p.language,
                "n_samples": p.n_samples,
                "contributors": p.contributors,
            })
        })
        .collect();
    run.write_json("profiles_audit", &audit)?;
    let per_language: Vec<_> = profiles.iter().filter(|p| p.language != POOLED).cloned().collect();
    match export_profiles_projection(&per_language) {
        Ok((_, csv)) => run.write_text("projection", &csv)?,
        Err(e @ (Error::InsufficientData { .. } | Error::DegenerateCovariance)) => {
            log::warn!("no projection written: {e}");
        }
        Err(e) => return Err(e),
    }
    Ok(echo(&cfg))
}

fn rank(run: &mut StageRun) -> Result<Value> {
    let cfg = run.cfg().rank.clone();
    let profiles: Vec<ProfileRecord> = run.read("profiles")?;
    let candidates: Vec<TextRecord> = run.read("candidates")?;
    let embeddings: Vec<EmbeddingRecord> = run.read("embeddings")?;
    let model = run.encoder()?.model()?;
    let speaker = match &cfg.speaker {
        Some(s) => s.clone(),
        None => profiles
            .first()
            .map(|p| p.speaker.clone())
            .ok_or_else(|| Error::EmptyGroup("profiles file is empty".into()))?,
    };
    let profile = profiles
        .iter()
        .find(|p| p.speaker == speaker && p.language == cfg.language)
        .ok_or_else(|| Error::ConfigInvalid(format!("no profile for speaker `{speaker}`, language `{}`", cfg.language)))?;
    let items = join_embeddings(&candidates, &embeddings)?;
    let refs: Vec<&EmbeddedText> = items.iter().collect();
    let latents = encode_items(&model, &refs)?;
    let scored: Vec<(String, Vec<f64>)> = items
        .iter()
        .map(|i| (i.id().to_string(), latents[i.id()].clone()))
        .collect();
    let mut ranking = rank_candidates(&profile.vector, &scored)?;
    if let Some(k) = cfg.top_k {
        ranking.truncate(k);
    }
    run.write_json("ranking", &ranking)?;
    Ok(json!({ "speaker": speaker, "language": cfg.language, "top_k": cfg.top_k }))
}
