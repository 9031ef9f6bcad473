//! In-memory property graph with merge-on-primary-key semantics.
//!
//! Nodes merge when they share their first label and primary attribute
//! (name and value). A merge unions labels (existing first) and overwrites
//! attributes key by key; keys missing from the update are kept.

mod canonical;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::value::Value;

pub use self::canonical::{canonical_form, EMPTY_CANONICAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("primary attribute `{key}` is null")]
    PrimaryNull { key: String },
    #[error("primary attribute `{key}` is {expected} but the element sets it to {found}")]
    PrimaryConflict {
        key: String,
        expected: Value,
        found: Value,
    },
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(NodeId),
    #[error("a node needs at least one label")]
    NoLabels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: NodeId,
    /// Insertion-ordered, duplicate free; element 0 is the merge label.
    pub labels: Vec<String>,
    pub attributes: BTreeMap<String, Value>,
    pub primary_key: Option<(String, Value)>,
}

impl GraphNode {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRelationship {
    pub id: RelId,
    pub source: NodeId,
    pub rel_type: String,
    pub target: NodeId,
    pub attributes: BTreeMap<String, Value>,
    pub primary_key: Option<(String, Value)>,
}

/// Result of an upsert: the element id and whether it was newly created.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upserted<I> {
    pub id: I,
    pub created: bool,
}

type NodeKey = (String, String, Value);
type RelKey = (NodeId, String, NodeId, String, Value);

#[derive(Debug, Clone, Default, PartialEq)]
struct Indexes {
    merge: HashMap<NodeKey, NodeId>,
    rel_merge: HashMap<RelKey, RelId>,
    by_label: HashMap<String, BTreeSet<NodeId>>,
    /// attribute name → value → nodes
    by_attr: HashMap<String, HashMap<Value, BTreeSet<NodeId>>>,
}

impl Indexes {
    fn add_attr(&mut self, id: NodeId, key: &str, value: &Value) {
        if !self.by_attr.contains_key(key) {
            self.by_attr.insert(key.to_string(), HashMap::new());
        }
        let values = self.by_attr.get_mut(key).expect("inserted above");
        values.entry(value.clone()).or_default().insert(id);
    }

    fn remove_attr(&mut self, id: NodeId, key: &str, value: &Value) {
        if let Some(values) = self.by_attr.get_mut(key) {
            if let Some(set) = values.get_mut(value) {
                set.remove(&id);
                if set.is_empty() {
                    values.remove(value);
                }
            }
            if values.is_empty() {
                self.by_attr.remove(key);
            }
        }
    }

    fn add_label(&mut self, id: NodeId, label: &str) {
        match self.by_label.get_mut(label) {
            Some(set) => {
                set.insert(id);
            }
            None => {
                self.by_label.insert(label.to_string(), BTreeSet::from([id]));
            }
        }
    }

    fn add_node(&mut self, n: &GraphNode) {
        for l in &n.labels {
            self.add_label(n.id, l);
        }
        for (k, v) in &n.attributes {
            self.add_attr(n.id, k, v);
        }
        if let Some((k, v)) = &n.primary_key {
            self.merge.insert((n.labels[0].clone(), k.clone(), v.clone()), n.id);
        }
    }

    fn add_relationship(&mut self, r: &GraphRelationship) {
        if let Some((k, v)) = &r.primary_key {
            self.rel_merge
                .insert((r.source, r.rel_type.clone(), r.target, k.clone(), v.clone()), r.id);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    // Ids are positions: elements are never deleted.
    nodes: Vec<GraphNode>,
    relationships: Vec<GraphRelationship>,
    index: Indexes,
}

fn check_primary(
    attributes: &mut BTreeMap<String, Value>,
    primary: Option<&(String, Value)>,
) -> Result<(), GraphError> {
    if let Some((key, value)) = primary {
        if value.is_null() {
            return Err(GraphError::PrimaryNull { key: key.clone() });
        }
        match attributes.get(key) {
            Some(found) if found != value => {
                return Err(GraphError::PrimaryConflict {
                    key: key.clone(),
                    expected: value.clone(),
                    found: found.clone(),
                })
            }
            Some(_) => {}
            None => {
                attributes.insert(key.clone(), value.clone());
            }
        }
    }
    Ok(())
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn relationship_count(&self) -> usize {
        self.relationships.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.relationships.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(id.0 as usize)
    }

    pub fn relationship(&self, id: RelId) -> Option<&GraphRelationship> {
        self.relationships.get(id.0 as usize)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.iter()
    }

    pub fn relationships(&self) -> impl Iterator<Item = &GraphRelationship> {
        self.relationships.iter()
    }

    /// Creates a node, or merges into the node with the same first label and
    /// primary attribute. The primary attribute is stored among the
    /// attributes; if `attributes` already holds that key, the values must
    /// agree.
    pub fn upsert_node(
        &mut self,
        labels: &[String],
        mut attributes: BTreeMap<String, Value>,
        primary: Option<(String, Value)>,
    ) -> Result<Upserted<NodeId>, GraphError> {
        if labels.is_empty() {
            return Err(GraphError::NoLabels);
        }
        check_primary(&mut attributes, primary.as_ref())?;

        let existing = primary
            .as_ref()
            .and_then(|(k, v)| self.index.merge.get(&(labels[0].clone(), k.clone(), v.clone())).copied());

        if let Some(id) = existing {
            let node = &mut self.nodes[id.0 as usize];
            for label in labels {
                if !node.labels.iter().any(|l| l == label) {
                    node.labels.push(label.clone());
                    self.index.add_label(id, label);
                }
            }
            for (k, v) in attributes {
                match node.attributes.get(&k) {
                    Some(old) if *old == v => {}
                    Some(old) => {
                        let old = old.clone();
                        self.index.remove_attr(id, &k, &old);
                        self.index.add_attr(id, &k, &v);
                        node.attributes.insert(k, v);
                    }
                    None => {
                        self.index.add_attr(id, &k, &v);
                        node.attributes.insert(k, v);
                    }
                }
            }
            return Ok(Upserted { id, created: false });
        }

        let id = NodeId(self.nodes.len() as u64);
        let mut unique: Vec<String> = Vec::with_capacity(labels.len());
        for l in labels {
            if !unique.contains(l) {
                unique.push(l.clone());
            }
        }
        let node = GraphNode {
            id,
            labels: unique,
            attributes,
            primary_key: primary,
        };
        self.index.add_node(&node);
        self.nodes.push(node);
        Ok(Upserted { id, created: true })
    }

    /// Creates a relationship, or merges into the one with the same
    /// endpoints, type and primary attribute. Without a primary attribute
    /// parallel relationships are always created.
    pub fn upsert_relationship(
        &mut self,
        source: NodeId,
        rel_type: &str,
        target: NodeId,
        mut attributes: BTreeMap<String, Value>,
        primary: Option<(String, Value)>,
    ) -> Result<Upserted<RelId>, GraphError> {
        for end in [source, target] {
            if self.node(end).is_none() {
                return Err(GraphError::UnknownEndpoint(end));
            }
        }
        check_primary(&mut attributes, primary.as_ref())?;

        if let Some((k, v)) = &primary {
            let key = (source, rel_type.to_string(), target, k.clone(), v.clone());
            if let Some(&id) = self.index.rel_merge.get(&key) {
                let rel = &mut self.relationships[id.0 as usize];
                rel.attributes.extend(attributes);
                return Ok(Upserted { id, created: false });
            }
        }

        let id = RelId(self.relationships.len() as u64);
        let rel = GraphRelationship {
            id,
            source,
            rel_type: rel_type.to_string(),
            target,
            attributes,
            primary_key: primary,
        };
        self.index.add_relationship(&rel);
        self.relationships.push(rel);
        Ok(Upserted { id, created: true })
    }

    /// All nodes carrying every label in `labels` (anywhere in their label
    /// list) and every attribute equality in `conditions`, in id order.
    pub fn match_nodes(&self, labels: &[String], conditions: &[(String, Value)]) -> Vec<NodeId> {
        let mut candidates: Vec<&BTreeSet<NodeId>> = Vec::with_capacity(labels.len() + conditions.len());
        for l in labels {
            match self.index.by_label.get(l) {
                Some(set) => candidates.push(set),
                None => return Vec::new(),
            }
        }
        for (k, v) in conditions {
            match self.index.by_attr.get(k).and_then(|values| values.get(v)) {
                Some(set) => candidates.push(set),
                None => return Vec::new(),
            }
        }
        let Some(smallest) = candidates.iter().min_by_key(|s| s.len()) else {
            // Neither labels nor conditions: everything matches.
            return self.nodes.iter().map(|n| n.id).collect();
        };
        smallest
            .iter()
            .copied()
            .filter(|id| candidates.iter().all(|s| s.contains(id)))
            .collect()
    }

    /// Rebuilds every index from the stored elements and compares it with the
    /// live one.
    pub fn audit(&self) -> Result<(), String> {
        let mut rebuilt = Indexes::default();
        for n in &self.nodes {
            rebuilt.add_node(n);
        }
        for r in &self.relationships {
            rebuilt.add_relationship(r);
        }
        let live = &self.index;
        let checks = [
            ("merge index", rebuilt.merge == live.merge),
            ("relationship merge index", rebuilt.rel_merge == live.rel_merge),
            ("label index", rebuilt.by_label == live.by_label),
            ("attribute index", rebuilt.by_attr == live.by_attr),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(format!("{name} differs from a full rebuild")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn attrs(kv: &[(&str, Value)]) -> BTreeMap<String, Value> {
        kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn pk(k: &str, v: impl Into<Value>) -> Option<(String, Value)> {
        Some((k.to_string(), v.into()))
    }

    #[test]
    fn no_primary_never_merges() {
        let mut g = PropertyGraph::new();
        let a = g.upsert_node(&labels(&["Category"]), attrs(&[("name", "T-Shirts".into())]), None).unwrap();
        let b = g.upsert_node(&labels(&["Category"]), attrs(&[("name", "T-Shirts".into())]), None).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn primary_merges_on_first_label() {
        let mut g = PropertyGraph::new();
        let ls = labels(&["Category", "Clothing"]);
        let a = g.upsert_node(&ls, BTreeMap::new(), pk("name", "T-Shirts")).unwrap();
        let b = g.upsert_node(&ls, BTreeMap::new(), pk("name", "T-Shirts")).unwrap();
        assert!(a.created && !b.created);
        assert_eq!(a.id, b.id);
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn merge_updates_labels_and_attributes() {
        let mut g = PropertyGraph::new();
        let a = g.upsert_node(&labels(&["X"]), attrs(&[("a", 1.into())]), pk("id", 0)).unwrap();
        let b = g
            .upsert_node(&labels(&["X", "Y"]), attrs(&[("a", 2.into()), ("b", 3.into())]), pk("id", 0))
            .unwrap();
        assert_eq!(a.id, b.id);
        let n = g.node(a.id).unwrap();
        assert_eq!(n.labels, labels(&["X", "Y"]));
        assert_eq!(n.attributes, attrs(&[("id", 0.into()), ("a", 2.into()), ("b", 3.into())]));
        // a different first label is a different merge key
        let c = g.upsert_node(&labels(&["Y", "X"]), BTreeMap::new(), pk("id", 0)).unwrap();
        assert!(c.created);
        g.audit().unwrap();
    }

    #[test]
    fn primary_errors() {
        let mut g = PropertyGraph::new();
        assert_eq!(
            g.upsert_node(&labels(&["X"]), BTreeMap::new(), pk("id", Value::Null)),
            Err(GraphError::PrimaryNull { key: "id".into() })
        );
        assert!(matches!(
            g.upsert_node(&labels(&["X"]), attrs(&[("id", 2.into())]), pk("id", 1)),
            Err(GraphError::PrimaryConflict { .. })
        ));
        assert_eq!(g.upsert_node(&[], BTreeMap::new(), None), Err(GraphError::NoLabels));
        assert!(g.is_empty());
    }

    #[test]
    fn relationships_merge_only_with_primary() {
        let mut g = PropertyGraph::new();
        let o = g.upsert_node(&labels(&["Order"]), BTreeMap::new(), None).unwrap().id;
        let p = g.upsert_node(&labels(&["Product"]), BTreeMap::new(), None).unwrap().id;
        g.upsert_relationship(o, "CONTAINS", p, BTreeMap::new(), None).unwrap();
        g.upsert_relationship(o, "CONTAINS", p, BTreeMap::new(), None).unwrap();
        assert_eq!(g.relationship_count(), 2);

        let a = g
            .upsert_relationship(o, "CONTAINS", p, attrs(&[("amount", 1.into())]), pk("lineno", 1))
            .unwrap();
        let b = g
            .upsert_relationship(o, "CONTAINS", p, attrs(&[("amount", 5.into())]), pk("lineno", 1))
            .unwrap();
        assert_eq!(a.id, b.id);
        assert_eq!(g.relationship_count(), 3);
        assert_eq!(g.relationship(a.id).unwrap().attributes["amount"], Value::Int(5));

        assert_eq!(
            g.upsert_relationship(o, "X", NodeId(99), BTreeMap::new(), None),
            Err(GraphError::UnknownEndpoint(NodeId(99)))
        );
        g.audit().unwrap();
    }

    #[test]
    fn match_by_any_label_and_attributes() {
        let mut g = PropertyGraph::new();
        assert!(g.match_nodes(&labels(&["Supplier"]), &[]).is_empty());
        let s1 = g.upsert_node(&labels(&["Supplier"]), BTreeMap::new(), pk("id", 1)).unwrap().id;
        let s2 = g.upsert_node(&labels(&["Supplier", "Local"]), BTreeMap::new(), pk("id", 2)).unwrap().id;
        assert_eq!(g.match_nodes(&labels(&["Supplier"]), &[("id".into(), 1.into())]), vec![s1]);
        assert_eq!(g.match_nodes(&labels(&["Local"]), &[]), vec![s2]);
        assert_eq!(g.match_nodes(&labels(&["Supplier"]), &[]), vec![s1, s2]);
        assert!(g.match_nodes(&labels(&["Supplier"]), &[("id".into(), "1".into())]).is_empty());
        assert!(g.match_nodes(&labels(&["Nope"]), &[]).is_empty());
    }

    #[derive(Debug, Clone)]
    enum Op {
        Node(Vec<String>, BTreeMap<String, Value>, Option<(String, Value)>),
        Rel(usize, String, usize, BTreeMap<String, Value>, Option<(String, Value)>),
    }

    fn small_value() -> impl Strategy<Value = Value> + Clone {
        prop_oneof![
            (0i64..4).prop_map(Value::Int),
            prop::sample::select(&["a", "b"][..]).prop_map(Value::from),
            Just(Value::Float(1.0)),
            Just(Value::Bool(true)),
        ]
    }

    fn op() -> impl Strategy<Value = Op> {
        let label = prop::sample::select(&["A", "B", "C"][..]).prop_map(str::to_string);
        let key = prop::sample::select(&["k", "m", "id"][..]).prop_map(str::to_string);
        let attrs = prop::collection::btree_map(key.clone(), small_value(), 0..3);
        let primary = prop::option::of((key, small_value()));
        prop_oneof![
            3 => (prop::collection::vec(label, 1..3), attrs.clone(), primary.clone())
                .prop_map(|(l, a, p)| Op::Node(l, a, p)),
            1 => (any::<usize>(), prop::sample::select(&["R", "S"][..]), any::<usize>(), attrs, primary)
                .prop_map(|(s, t, d, a, p)| Op::Rel(s, t.to_string(), d, a, p)),
        ]
    }

    fn apply(g: &mut PropertyGraph, op: &Op) {
        match op.clone() {
            Op::Node(l, a, p) => {
                let _ = g.upsert_node(&l, a, p);
            }
            Op::Rel(s, t, d, a, p) if g.node_count() > 0 => {
                let n = g.node_count();
                let _ = g.upsert_relationship(NodeId((s % n) as u64), &t, NodeId((d % n) as u64), a, p);
            }
            Op::Rel(..) => {}
        }
    }

    proptest! {
        #[test]
        fn merge_keys_stay_unique_and_indexes_consistent(ops in prop::collection::vec(op(), 0..60)) {
            let mut g = PropertyGraph::new();
            for op in &ops {
                apply(&mut g, op);
            }
            let mut keys = BTreeSet::new();
            for n in g.nodes() {
                if let Some((k, v)) = &n.primary_key {
                    prop_assert!(!v.is_null());
                    prop_assert!(keys.insert((n.labels[0].clone(), k.clone(), v.clone())));
                    prop_assert_eq!(n.attributes.get(k), Some(v));
                }
            }
            let mut rel_keys = BTreeSet::new();
            for r in g.relationships() {
                if let Some((k, v)) = &r.primary_key {
                    prop_assert!(rel_keys.insert((r.source, r.rel_type.clone(), r.target, k.clone(), v.clone())));
                }
            }
            prop_assert_eq!(g.audit(), Ok(()));
        }

        #[test]
        fn repeated_upsert_is_idempotent(
            ops in prop::collection::vec(op(), 0..30),
            l in prop::collection::vec(prop::sample::select(&["A", "B"][..]).prop_map(str::to_string), 1..3),
            a in prop::collection::btree_map(prop::sample::select(&["k", "m"][..]).prop_map(str::to_string), small_value(), 0..3),
            v in small_value(),
        ) {
            let mut g = PropertyGraph::new();
            for op in &ops {
                apply(&mut g, op);
            }
            let first = g.upsert_node(&l, a.clone(), Some(("id".into(), v.clone())));
            let snapshot = canonical_form(&g);
            let second = g.upsert_node(&l, a, Some(("id".into(), v)));
            if let (Ok(first), Ok(second)) = (first, second) {
                prop_assert_eq!(first.id, second.id);
                prop_assert!(!second.created);
            }
            prop_assert_eq!(canonical_form(&g), snapshot);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn match_equals_brute_force(
            nodes in prop::collection::vec(
                (
                    prop::collection::vec(prop::sample::select(&["A", "B", "C", "D"][..]).prop_map(str::to_string), 1..4),
                    prop::collection::btree_map(prop::sample::select(&["k", "m", "n"][..]).prop_map(str::to_string), small_value(), 0..3),
                ),
                0..200,
            ),
            query_labels in prop::collection::vec(prop::sample::select(&["A", "B", "C", "D"][..]).prop_map(str::to_string), 1..3),
            conditions in prop::collection::vec((prop::sample::select(&["k", "m", "n"][..]).prop_map(str::to_string), small_value()), 0..3),
        ) {
            let mut g = PropertyGraph::new();
            for (l, a) in nodes {
                g.upsert_node(&l, a, None).unwrap();
            }
            let expected: Vec<NodeId> = g
                .nodes()
                .filter(|n| query_labels.iter().all(|l| n.has_label(l)))
                .filter(|n| conditions.iter().all(|(k, v)| n.attributes.get(k) == Some(v)))
                .map(|n| n.id)
                .collect();
            prop_assert_eq!(g.match_nodes(&query_labels, &conditions), expected);
        }
    }
}
