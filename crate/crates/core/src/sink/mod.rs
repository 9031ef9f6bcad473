//! Consumers of the commit stream.
//!
//! The converter hands every committed element to a [`CommitSink`] from its
//! single committer thread, in commit order, and calls
//! [`CommitSink::finish`] once with the final graph.

mod cypher;
mod http;
mod json;

use crate::graph::{NodeId, PropertyGraph, RelId, Upserted};
use crate::subgraph::{PendingNode, PendingRelationship};

pub use self::cypher::{cypher_identifier, cypher_value, CypherSink};
pub use self::http::{HttpConfig, HttpSink, HttpStatement};
pub use self::json::JsonSink;

#[derive(Debug, thiserror::Error)]
pub enum SinkError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("remote error {code}: {message}")]
    Remote { code: String, message: String },
}

/// One committed element, as submitted, with the upsert outcome.
#[derive(Debug, Clone, Copy)]
pub enum Commit<'a> {
    Node {
        node: &'a PendingNode,
        outcome: Upserted<NodeId>,
    },
    Relationship {
        relationship: &'a PendingRelationship,
        source: NodeId,
        target: NodeId,
        outcome: Upserted<RelId>,
    },
}

pub trait CommitSink: Send {
    /// Called after each element is written to `graph`.
    fn on_commit(&mut self, commit: &Commit<'_>, graph: &PropertyGraph) -> Result<(), SinkError>;

    /// Called once after the last commit.
    fn finish(&mut self, graph: &PropertyGraph) -> Result<(), SinkError>;
}

/// Discards everything; the graph itself is the result.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl CommitSink for NullSink {
    fn on_commit(&mut self, _: &Commit<'_>, _: &PropertyGraph) -> Result<(), SinkError> {
        Ok(())
    }

    fn finish(&mut self, _: &PropertyGraph) -> Result<(), SinkError> {
        Ok(())
    }
}
