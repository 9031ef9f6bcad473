use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{Resource, ResourceIterator, SourceColumns, SourceError};
use crate::value::Value;

/// Reads a file of flat JSON objects, one per line, all of one resource type.
///
/// Blank lines are skipped. Every object must carry the same key set as the
/// first one.
pub struct JsonlIterator {
    path: PathBuf,
    type_name: Arc<str>,
    columns: Option<BTreeSet<String>>,
    rows: u64,
    lines: Option<std::io::Lines<BufReader<File>>>,
    line: u64,
    ordinal: u64,
}

pub fn jsonl_iterator(
    file_path: impl AsRef<Path>,
    type_name: &str,
) -> Result<JsonlIterator, SourceError> {
    if type_name.is_empty() {
        return Err(SourceError::Other("JSONL type name must be non-empty".into()));
    }
    let mut it = JsonlIterator {
        path: file_path.as_ref().to_path_buf(),
        type_name: Arc::from(type_name),
        columns: None,
        rows: 0,
        lines: None,
        line: 0,
        ordinal: 0,
    };
    // Pre-scan for the row count, the key set, and early error reporting.
    let mut rows = 0;
    while it.step()?.is_some() {
        rows += 1;
    }
    it.rows = rows;
    it.reset()?;
    Ok(it)
}

fn convert(v: serde_json::Value) -> Result<Value, String> {
    Ok(match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().ok_or("unrepresentable number")?),
        },
        serde_json::Value::String(s) => Value::Text(s),
        serde_json::Value::Array(_) | serde_json::Value::Object(_) => {
            return Err("nested arrays and objects are not supported".into())
        }
    })
}

impl JsonlIterator {
    fn malformed(&self, message: String) -> SourceError {
        SourceError::Malformed {
            path: self.path.clone(),
            line: self.line,
            message,
        }
    }

    fn step(&mut self) -> Result<Option<Resource>, SourceError> {
        if self.lines.is_none() {
            let file = File::open(&self.path).map_err(|source| SourceError::Io {
                path: self.path.clone(),
                source,
            })?;
            self.lines = Some(BufReader::new(file).lines());
        }
        loop {
            let Some(line) = self.lines.as_mut().expect("open").next() else {
                return Ok(None);
            };
            self.line += 1;
            let line = line.map_err(|source| SourceError::Io {
                path: self.path.clone(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| self.malformed(e.to_string()))?;
            let serde_json::Value::Object(map) = parsed else {
                return Err(self.malformed("expected a JSON object".into()));
            };
            let mut r = Resource::new(self.type_name.clone(), self.ordinal);
            for (k, v) in map {
                let v = convert(v).map_err(|m| self.malformed(format!("key `{k}`: {m}")))?;
                r.set(k, v);
            }
            match &self.columns {
                None => self.columns = Some(r.attributes().map(|(k, _)| k.to_string()).collect()),
                Some(keys) => {
                    let same = r.len() == keys.len() && r.attributes().all(|(k, _)| keys.contains(k));
                    if !same {
                        return Err(self.malformed(format!(
                            "key set differs from the first object of type `{}`",
                            self.type_name
                        )));
                    }
                }
            }
            self.ordinal += 1;
            return Ok(Some(r));
        }
    }
}

impl Iterator for JsonlIterator {
    type Item = Result<Resource, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step().transpose()
    }
}

impl ResourceIterator for JsonlIterator {
    fn reset(&mut self) -> Result<(), SourceError> {
        self.lines = None;
        self.line = 0;
        self.ordinal = 0;
        Ok(())
    }

    fn total(&self) -> Option<u64> {
        Some(self.rows)
    }

    fn columns(&self) -> SourceColumns {
        std::iter::once((self.type_name.to_string(), self.columns.clone().unwrap_or_default())).collect()
    }
}
