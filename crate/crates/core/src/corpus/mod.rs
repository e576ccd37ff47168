//! Records, artifact file formats and sentence chunking.

mod chunk;
mod jsonl;

pub use chunk::{chunk_sentences, estimate_tokens, split_sentences, tokens_per_word_tenths, Chunk};
pub use jsonl::{read_jsonl, read_jsonl_from, write_jsonl, write_jsonl_to, JsonlRecord};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provider context budget, in estimated tokens.
pub const DEFAULT_TOKEN_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Speaker,
    External,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Speaker => f.write_str("speaker"),
            Source::External => f.write_str("external"),
        }
    }
}

/// One line of `corpus.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextRecord {
    pub id: String,
    pub speaker: String,
    pub language: String,
    pub text: String,
    pub source: Source,
}

impl TextRecord {
    pub fn is_speaker(&self) -> bool {
        self.source == Source::Speaker
    }
}

/// Lowercase two-letter ISO-639-1 code.
pub fn is_language_code(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase())
}

/// A record paired with its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedText {
    pub record: TextRecord,
    pub embedding: Vec<f64>,
}

impl EmbeddedText {
    pub fn id(&self) -> &str {
        &self.record.id
    }
}

/// One line of `embeddings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    #[serde(serialize_with = "floats::serialize_vec")]
    pub vector: Vec<f64>,
}

/// One line of `clusters.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterRecord {
    pub id: String,
    pub cluster: usize,
}

/// One line of `pairs.jsonl`. Label 0 marks a similar-style pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub label: u8,
}

/// One line of `profiles.jsonl`; `language` is `"*"` for a pooled profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRecord {
    pub speaker: String,
    pub language: String,
    #[serde(serialize_with = "floats::serialize_vec")]
    pub vector: Vec<f64>,
}

/// Joins corpus records with their embeddings, in corpus order.
///
/// Every record must have exactly one embedding; all embeddings must share a
/// dimension and have unit norm within 1e-6.
pub fn join_embeddings(
    records: &[TextRecord],
    embeddings: &[EmbeddingRecord],
) -> Result<Vec<EmbeddedText>> {
    let by_id: HashMap<&str, &EmbeddingRecord> =
        embeddings.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut dim = None;
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let e = by_id.get(record.id.as_str()).ok_or_else(|| {
            Error::InconsistentInput(format!("no embedding for id `{}`", record.id))
        })?;
        let d = *dim.get_or_insert(e.vector.len());
        if e.vector.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: e.vector.len(),
            });
        }
        let n = crate::vecmath::norm(&e.vector);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::InconsistentInput(format!(
                "embedding for `{}` has norm {n}, expected unit norm",
                record.id
            )));
        }
        out.push(EmbeddedText {
            record: record.clone(),
            embedding: e.vector.clone(),
        });
    }
    Ok(out)
}

pub mod floats {
    //! Float serialization with 17 significant digits.

    use serde::ser::{Error as _, SerializeSeq};
    use serde::Serializer;
    use serde_json::value::RawValue;

    pub fn format(x: f64) -> String {
        format!("{x:.16e}")
    }

    pub fn serialize_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if !x.is_finite() {
                return Err(S::Error::custom("non-finite float"));
            }
            let raw = RawValue::from_string(format(*x)).map_err(S::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }
}
