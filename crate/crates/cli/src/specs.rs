//! `--source` and `--sink` arguments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use relgraph::resource::{chain, csv_iterator, jsonl_iterator, sqlite_iterator, ResourceIterator, SourceError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Sqlite(PathBuf),
    Csv(PathBuf),
    Jsonl { path: PathBuf, type_name: String },
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("source `{s}` must look like sqlite:<path>, csv:<dir> or jsonl:<path>@<type>"))?;
        if rest.is_empty() {
            return Err(format!("source `{s}` has an empty path"));
        }
        match kind {
            "sqlite" => Ok(SourceSpec::Sqlite(rest.into())),
            "csv" => Ok(SourceSpec::Csv(rest.into())),
            "jsonl" => match rest.rsplit_once('@') {
                Some((path, type_name)) if !path.is_empty() && !type_name.is_empty() => Ok(SourceSpec::Jsonl {
                    path: path.into(),
                    type_name: type_name.to_string(),
                }),
                _ => Err(format!("source `{s}` needs a resource type: jsonl:<path>@<type>")),
            },
            other => Err(format!("unknown source kind `{other}` (expected sqlite, csv or jsonl)")),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Sqlite(p) => write!(f, "sqlite:{}", p.display()),
            SourceSpec::Csv(p) => write!(f, "csv:{}", p.display()),
            SourceSpec::Jsonl { path, type_name } => write!(f, "jsonl:{}@{type_name}", path.display()),
        }
    }
}

impl SourceSpec {
    pub fn open(&self) -> Result<Box<dyn ResourceIterator>, SourceError> {
        Ok(match self {
            SourceSpec::Sqlite(p) => Box::new(sqlite_iterator(p, None)?),
            SourceSpec::Csv(p) => Box::new(csv_iterator(p)?),
            SourceSpec::Jsonl { path, type_name } => Box::new(jsonl_iterator(path, type_name)?),
        })
    }
}

/// Opens every source, chained in the order given.
pub fn open_sources(specs: &[SourceSpec]) -> Result<Box<dyn ResourceIterator>, SourceError> {
    let mut parts = specs.iter().map(SourceSpec::open).collect::<Result<Vec<_>, _>>()?;
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Box::new(chain(parts))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkSpec {
    Json(PathBuf),
    Cypher(PathBuf),
    Http(String),
}

impl FromStr for SinkSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("sink `{s}` must look like json:<path>, cypher:<path> or http:<url>"))?;
        if rest.is_empty() {
            return Err(format!("sink `{s}` has an empty target"));
        }
        match kind {
            "json" => Ok(SinkSpec::Json(rest.into())),
            "cypher" => Ok(SinkSpec::Cypher(rest.into())),
            "http" => Ok(SinkSpec::Http(rest.to_string())),
            other => Err(format!("unknown sink kind `{other}` (expected json, cypher or http)")),
        }
    }
}
