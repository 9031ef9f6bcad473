//! Resources and the iterators that produce them.
//!
//! A [`Resource`] is one row or entity from a source, tagged with a static type
//! name. Iterators are pull-based and resettable because the converter makes
//! two full passes over its input.

mod chain;
mod csv;
mod jsonl;
mod sqlite;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::value::Value;

pub use self::chain::{chain, Chain};
pub use self::csv::{csv_iterator, CsvIterator};
pub use self::jsonl::{jsonl_iterator, JsonlIterator};
pub use self::sqlite::{sqlite_iterator, SqliteIterator};

/// Column names per resource type, as advertised by a source.
pub type SourceColumns = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sqlite error in {path}: {source}")]
    Sqlite {
        path: PathBuf,
        #[source]
        source: rusqlite::Error,
    },
    #[error("table `{table}` not found in {path}")]
    MissingTable { path: PathBuf, table: String },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{0}")]
    Other(String),
}

/// One typed row.
#[derive(Debug, Clone, PartialEq)]
pub struct Resource {
    type_name: Arc<str>,
    ordinal: u64,
    attributes: BTreeMap<Arc<str>, Value>,
}

impl Resource {
    pub fn new(type_name: impl Into<Arc<str>>, ordinal: u64) -> Self {
        let type_name = type_name.into();
        assert!(!type_name.is_empty(), "resource type name must be non-empty");
        Resource {
            type_name,
            ordinal,
            attributes: BTreeMap::new(),
        }
    }

    /// Builds a resource from shared column names and a row of values.
    pub fn from_row(
        type_name: Arc<str>,
        ordinal: u64,
        columns: &[Arc<str>],
        values: impl IntoIterator<Item = Value>,
    ) -> Self {
        let attributes = columns.iter().cloned().zip(values).collect();
        Resource {
            type_name,
            ordinal,
            attributes,
        }
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }

    pub fn shared_type_name(&self) -> &Arc<str> {
        &self.type_name
    }

    /// 0-based position within the resource's own source and type.
    pub fn ordinal(&self) -> u64 {
        self.ordinal
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.attributes.contains_key(name)
    }

    pub fn set(&mut self, name: impl Into<Arc<str>>, value: impl Into<Value>) {
        self.attributes.insert(name.into(), value.into());
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.attributes.remove(name)
    }

    pub fn with(mut self, name: impl Into<Arc<str>>, value: impl Into<Value>) -> Self {
        self.set(name, value);
        self
    }

    pub fn attributes(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.attributes.iter().map(|(k, v)| (&**k, v))
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.type_name, self.ordinal)
    }
}

/// A resettable stream of resources.
///
/// Implementations are single-consumer and need not be thread-safe.
pub trait ResourceIterator: Iterator<Item = Result<Resource, SourceError>> {
    /// Rewinds to the first resource. Two full passes separated by a reset
    /// yield identical sequences.
    fn reset(&mut self) -> Result<(), SourceError>;

    /// Total number of resources in a full pass, when known.
    fn total(&self) -> Option<u64>;

    /// Column names per resource type.
    fn columns(&self) -> SourceColumns;
}

impl<I: ResourceIterator + ?Sized> ResourceIterator for Box<I> {
    fn reset(&mut self) -> Result<(), SourceError> {
        (**self).reset()
    }

    fn total(&self) -> Option<u64> {
        (**self).total()
    }

    fn columns(&self) -> SourceColumns {
        (**self).columns()
    }
}

/// An in-memory source, mostly useful for tests and embedding.
#[derive(Debug, Clone, Default)]
pub struct VecIterator {
    resources: Vec<Resource>,
    position: usize,
}

impl VecIterator {
    pub fn new(resources: Vec<Resource>) -> Self {
        VecIterator {
            resources,
            position: 0,
        }
    }
}

impl Iterator for VecIterator {
    type Item = Result<Resource, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        let r = self.resources.get(self.position)?.clone();
        self.position += 1;
        Some(Ok(r))
    }
}

impl ResourceIterator for VecIterator {
    fn reset(&mut self) -> Result<(), SourceError> {
        self.position = 0;
        Ok(())
    }

    fn total(&self) -> Option<u64> {
        Some(self.resources.len() as u64)
    }

    fn columns(&self) -> SourceColumns {
        let mut out = SourceColumns::new();
        for r in &self.resources {
            let cols = out.entry(r.type_name().to_string()).or_default();
            cols.extend(r.attributes().map(|(k, _)| k.to_string()));
        }
        out
    }
}
