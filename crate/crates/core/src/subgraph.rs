//! Graph elements built from a single resource, before they are committed.

use std::collections::BTreeMap;

use crate::graph::NodeId;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct PendingNode {
    /// Resolved labels; element 0 is the merge label.
    pub labels: Vec<String>,
    pub attributes: BTreeMap<String, Value>,
    /// Key of the primary attribute, if the template declared one.
    pub primary: Option<String>,
    pub template_index: usize,
}

impl PendingNode {
    pub fn primary_pair(&self) -> Option<(&str, &Value)> {
        let key = self.primary.as_deref()?;
        Some((key, self.attributes.get(key).unwrap_or(&Value::Null)))
    }
}

/// One side of a pending relationship.
#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    /// Nodes already known by id (identifier references resolve to zero or one).
    Nodes(Vec<NodeId>),
    /// Evaluated against the committed graph at commit time.
    Match {
        labels: Vec<String>,
        conditions: Vec<(String, Value)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingRelationship {
    pub source: Endpoint,
    pub rel_type: String,
    pub target: Endpoint,
    pub attributes: BTreeMap<String, Value>,
    pub primary: Option<String>,
    pub template_index: usize,
}

impl PendingRelationship {
    pub fn primary_pair(&self) -> Option<(&str, &Value)> {
        let key = self.primary.as_deref()?;
        Some((key, self.attributes.get(key).unwrap_or(&Value::Null)))
    }
}

/// The nodes and relationships produced from one resource by one template.
/// Subgraph postprocessors receive and return this.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Subgraph {
    pub nodes: Vec<PendingNode>,
    pub relationships: Vec<PendingRelationship>,
}

impl Subgraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.relationships.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + self.relationships.len()
    }
}
