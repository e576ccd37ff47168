//! Labelled synthetic corpora with known style, topic and language factors.
//!
//! Every embedding is `normalize(α·S[style] + β·C[topic] + λ·L[language] + σ·ε)`
//! where the factor bases are mutually orthogonal unit vectors and `ε` is
//! per-sample standard Gaussian noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedText, JsonlRecord, Source, TextRecord};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::vecmath::normalize;

const LANGUAGES: [&str; 8] = ["en", "fr", "de", "es", "it", "pt", "nl", "sv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub n_topics: usize,
    pub n_languages: usize,
    pub samples_per_cell: usize,
    pub dim: usize,
    pub style_strength: f64,
    pub content_strength: f64,
    pub language_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// External (non-speaker) items generated per (speaker, topic, language)
    /// cell. They are attributed to the cell's speaker dataset.
    pub external_per_cell: usize,
    /// Probability that an external item carries its dataset speaker's style
    /// rather than a distractor style.
    pub external_style_match: f64,
    pub n_distractor_styles: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 4,
            n_topics: 6,
            n_languages: 2,
            samples_per_cell: 20,
            dim: 64,
            style_strength: 1.0,
            content_strength: 1.0,
            language_strength: 0.2,
            noise_sigma: 0.1,
            seed: 7,
            external_per_cell: 0,
            external_style_match: 0.5,
            n_distractor_styles: 4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(format!("synth: {m}")));
        if self.n_speakers == 0 || self.n_topics == 0 || self.n_languages == 0 {
            return bad("n_speakers, n_topics and n_languages must be positive");
        }
        if self.samples_per_cell == 0 || self.dim == 0 {
            return bad("samples_per_cell and dim must be positive");
        }
        if self.n_languages > LANGUAGES.len() {
            return bad(&format!("at most {} languages are supported", LANGUAGES.len()));
        }
        let strengths = [
            self.style_strength,
            self.content_strength,
            self.language_strength,
            self.noise_sigma,
        ];
        if strengths.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("strengths must be finite and non-negative");
        }
        if strengths.iter().sum::<f64>() <= 0.0 {
            return bad("at least one strength must be positive");
        }
        if !(0.0..=1.0).contains(&self.external_style_match) {
            return bad("external_style_match must lie in [0, 1]");
        }
        if self.external_per_cell > 0
            && self.external_style_match < 1.0
            && self.n_distractor_styles == 0
        {
            return bad("distractor externals need n_distractor_styles > 0");
        }
        Ok(())
    }

    pub fn language_codes(&self) -> Vec<String> {
        LANGUAGES[..self.n_languages].iter().map(|s| s.to_string()).collect()
    }

    fn n_styles(&self) -> usize {
        self.n_speakers + if self.external_per_cell > 0 { self.n_distractor_styles } else { 0 }
    }
}

pub fn speaker_name(index: usize) -> String {
    format!("spk{index:02}")
}

/// Latent factors behind one synthetic item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub id: String,
    /// Style factor index; indices `>= n_speakers` are distractor styles.
    pub style: usize,
    pub topic: usize,
    pub language: String,
}

impl JsonlRecord for TruthRecord {
    fn key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Vec<TextRecord>,
    pub embeddings: Vec<EmbeddedText>,
    pub truth: Vec<TruthRecord>,
    pub style_basis: Vec<Vec<f64>>,
    pub topic_basis: Vec<Vec<f64>>,
    pub language_basis: Vec<Vec<f64>>,
}

/// Gram-Schmidt over seeded Gaussian draws. Vectors beyond `dim` cannot be
/// orthogonal to the rest and are returned merely normalized.
fn orthonormal_basis(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    for i in 0..count {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let mut v = raw.clone();
        if i < dim {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let v = normalize(&v).or_else(|_| normalize(&raw)).unwrap_or_else(|_| {
            let mut e = vec![0.0; dim];
            e[i % dim] = 1.0;
            e
        });
        basis.push(v);
    }
    basis
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let n_factors = cfg.n_styles() + cfg.n_topics + cfg.n_languages;
    if n_factors > cfg.dim {
        log::warn!(
            "synth: dim {} is below the {n_factors} latent factors; bases will overlap",
            cfg.dim
        );
    }

    let mut basis_rng = rng_for(cfg.seed, "synth/basis");
    let all = orthonormal_basis(n_factors, cfg.dim, &mut basis_rng);
    let n_styles = cfg.n_styles();
    let style_basis = all[..n_styles].to_vec();
    let topic_basis = all[n_styles..n_styles + cfg.n_topics].to_vec();
    let language_basis = all[n_styles + cfg.n_topics..].to_vec();
    let languages = cfg.language_codes();

    let mut noise_rng = rng_for(cfg.seed, "synth/noise");
    let mut style_rng = rng_for(cfg.seed, "synth/external-style");
    let mut corpus = Vec::new();
    let mut embeddings = Vec::new();
    let mut truth = Vec::new();

    let mut emit = |id: String,
                    speaker: usize,
                    style: usize,
                    topic: usize,
                    lang: usize,
                    source: Source,
                    noise_rng: &mut ChaCha8Rng|
     -> Result<()> {
        let raw: Vec<f64> = (0..cfg.dim)
            .map(|j| {
                let eps: f64 = StandardNormal.sample(noise_rng);
                cfg.style_strength * style_basis[style][j]
                    + cfg.content_strength * topic_basis[topic][j]
                    + cfg.language_strength * language_basis[lang][j]
                    + cfg.noise_sigma * eps
            })
            .collect();
        let embedding = normalize(&raw)?;
        let record = TextRecord {
            text: format!(
                "[synthetic {source}] speaker={} style={style} topic={topic} language={}.",
                speaker_name(speaker),
                languages[lang]
            ),
            id: id.clone(),
            speaker: speaker_name(speaker),
            language: languages[lang].clone(),
            source,
        };
        truth.push(TruthRecord {
            id,
            style,
            topic,
            language: languages[lang].clone(),
        });
        corpus.push(record.clone());
        embeddings.push(EmbeddedText { record, embedding });
        Ok(())
    };

    for s in 0..cfg.n_speakers {
        for t in 0..cfg.n_topics {
            for l in 0..cfg.n_languages {
                for k in 0..cfg.samples_per_cell {
                    let id = format!("{}-t{t:02}-{}-{k:03}", speaker_name(s), languages[l]);
                    emit(id, s, s, t, l, Source::Speaker, &mut noise_rng)?;
                }
                for k in 0..cfg.external_per_cell {
                    let style = if style_rng.random::<f64>() < cfg.external_style_match {
                        s
                    } else {
                        cfg.n_speakers + style_rng.random_range(0..cfg.n_distractor_styles)
                    };
                    let id = format!("ext-{}-t{t:02}-{}-{k:03}", speaker_name(s), languages[l]);
                    emit(id, s, style, t, l, Source::External, &mut noise_rng)?;
                }
            }
        }
    }

    Ok(SynthOutput {
        corpus,
        embeddings,
        truth,
        style_basis,
        topic_basis,
        language_basis,
    })
}
