use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    is_language_code, ClusterRecord, EmbeddingRecord, PairRecord, ProfileRecord, TextRecord,
};
use crate::error::{Error, Result};

/// A record type stored one JSON object per line.
pub trait JsonlRecord: Serialize + DeserializeOwned {
    /// Uniqueness key within a file, if the format has one.
    fn key(&self) -> Option<String> {
        None
    }

    /// Semantic checks beyond the serde schema, as `(field, message)`.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        Ok(())
    }
}

impl JsonlRecord for TextRecord {
    fn key(&self) -> Option<String> {
        Some(self.id.clone())
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.id.is_empty() {
            return Err(("id", "empty id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(("text", "text is empty after trimming".into()));
        }
        if !is_language_code(&self.language) {
            return Err((
                "language",
                format!("`{}` is not a lowercase ISO-639-1 code", self.language),
            ));
        }
        Ok(())
    }
}

impl JsonlRecord for EmbeddingRecord {
    fn key(&self) -> Option<String> {
        Some(self.id.clone())
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.vector.is_empty() {
            return Err(("vector", "empty vector".into()));
        }
        if !self.vector.iter().all(|x| x.is_finite()) {
            return Err(("vector", "non-finite entry".into()));
        }
        Ok(())
    }
}

impl JsonlRecord for ClusterRecord {
    fn key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

impl JsonlRecord for PairRecord {
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.label > 1 {
            return Err(("label", format!("label must be 0 or 1, got {}", self.label)));
        }
        if self.a == self.b {
            return Err(("b", "pair links an item to itself".into()));
        }
        Ok(())
    }
}

impl JsonlRecord for ProfileRecord {
    fn key(&self) -> Option<String> {
        Some(format!("{}\u{0}{}", self.speaker, self.language))
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.language != "*" && !is_language_code(&self.language) {
            return Err(("language", format!("invalid language `{}`", self.language)));
        }
        if !self.vector.iter().all(|x| x.is_finite()) {
            return Err(("vector", "non-finite entry".into()));
        }
        Ok(())
    }
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Parses records from a reader; `path` is used for error context only.
pub fn read_jsonl_from<R: JsonlRecord>(reader: impl BufRead, path: &Path) -> Result<Vec<R>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: R = serde_json::from_str(&line).map_err(|e| {
            let message = e.to_string();
            match e.classify() {
                serde_json::error::Category::Data => Error::SchemaViolation {
                    path: path.to_path_buf(),
                    line: line_no,
                    field: backticked(&message).unwrap_or_else(|| "<value>".into()),
                    message,
                },
                _ => Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                },
            }
        })?;
        record
            .validate()
            .map_err(|(field, message)| Error::SchemaViolation {
                path: path.to_path_buf(),
                line: line_no,
                field: field.to_string(),
                message,
            })?;
        if let Some(key) = record.key() {
            if !seen.insert(key.clone()) {
                return Err(Error::DuplicateId {
                    path: path.to_path_buf(),
                    line: line_no,
                    id: key.replace('\u{0}', "/"),
                });
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_jsonl<R: JsonlRecord>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_from(BufReader::new(file), path)
}

pub fn write_jsonl_to<R: JsonlRecord>(mut writer: impl Write, records: &[R]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_jsonl<R: JsonlRecord>(path: impl AsRef<Path>, records: &[R]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl_to(BufWriter::new(file), records).map_err(|e| Error::io(path, e))
}
