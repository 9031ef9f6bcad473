//! Insertion-order independent serialization of a graph.
//!
//! Nodes are sorted by (sorted labels, sorted attributes, serialized form);
//! nodes that tie on all of these are told apart by colour refinement over
//! their relationships, and only then by id. Relationships refer to nodes by
//! their sorted position.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde_json::{json, Map};

use super::{GraphNode, GraphRelationship, NodeId, PropertyGraph};
use crate::value::Value;

pub const EMPTY_CANONICAL: &str = "{\n  \"nodes\": [],\n  \"relationships\": []\n}";

fn attributes_json(attrs: &BTreeMap<String, Value>) -> serde_json::Value {
    serde_json::Value::Object(attrs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect::<Map<_, _>>())
}

fn node_json(n: &GraphNode) -> String {
    json!({
        "labels": n.labels,
        "primary": n.primary_key.as_ref().map(|(k, _)| k),
        "attributes": attributes_json(&n.attributes),
    })
    .to_string()
}

fn rel_json(r: &GraphRelationship, source: usize, target: usize) -> String {
    json!({
        "source": source,
        "type": r.rel_type,
        "target": target,
        "primary": r.primary_key.as_ref().map(|(k, _)| k),
        "attributes": attributes_json(&r.attributes),
    })
    .to_string()
}

/// Dense ranks of `keys`: equal keys share a rank, ranks follow key order.
fn ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut out = vec![0; keys.len()];
    let mut rank = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            rank += 1;
        }
        out[order[w]] = rank;
    }
    out
}

fn distinct(colours: &[usize]) -> usize {
    colours.iter().max().map_or(0, |m| m + 1)
}

/// Refines `colours` by the multiset of (direction, relationship, neighbour
/// colour) until the partition is stable.
fn refine(g: &PropertyGraph, mut colours: Vec<usize>, rel_text: &[String]) -> Vec<usize> {
    let mut incident: Vec<Vec<(bool, usize, usize)>> = vec![Vec::new(); colours.len()];
    for (i, r) in g.relationships().enumerate() {
        let (s, t) = (r.source.0 as usize, r.target.0 as usize);
        incident[s].push((true, i, t));
        incident[t].push((false, i, s));
    }
    let rel_rank = ranks(rel_text);
    loop {
        let signatures: Vec<(usize, Vec<(bool, usize, usize)>)> = incident
            .iter()
            .enumerate()
            .map(|(n, edges)| {
                let mut sig: Vec<_> = edges
                    .iter()
                    .map(|&(out, rel, other)| (out, rel_rank[rel], colours[other]))
                    .collect();
                sig.sort_unstable();
                (colours[n], sig)
            })
            .collect();
        let next = ranks(&signatures);
        if distinct(&next) == distinct(&colours) {
            return next;
        }
        colours = next;
    }
}

/// Canonical JSON document for `g`. Equal documents mean equal graphs up to
/// element ids.
pub fn canonical_form(g: &PropertyGraph) -> String {
    let texts: Vec<String> = g.nodes().map(node_json).collect();
    let keys: Vec<(Vec<&str>, Vec<(&str, &Value)>, &str)> = g
        .nodes()
        .zip(&texts)
        .map(|(n, text)| {
            let mut labels: Vec<&str> = n.labels.iter().map(String::as_str).collect();
            labels.sort_unstable();
            let attrs = n.attributes.iter().map(|(k, v)| (k.as_str(), v)).collect();
            (labels, attrs, text.as_str())
        })
        .collect();
    let mut colours = ranks(&keys);
    if distinct(&colours) < colours.len() {
        // Relationship content without endpoints; endpoints enter through
        // the neighbour colours.
        let rel_text: Vec<String> = g.relationships().map(|r| rel_json(r, 0, 0)).collect();
        colours = refine(g, colours, &rel_text);
    }

    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.sort_by_key(|&i| (colours[i], i));
    let mut position: HashMap<NodeId, usize> = HashMap::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        position.insert(NodeId(i as u64), pos);
    }

    let mut rels: Vec<((usize, &str, usize, Vec<(&str, &Value)>), String)> = g
        .relationships()
        .map(|r| {
            let (s, t) = (position[&r.source], position[&r.target]);
            let attrs = r.attributes.iter().map(|(k, v)| (k.as_str(), v)).collect();
            ((s, r.rel_type.as_str(), t, attrs), rel_json(r, s, t))
        })
        .collect();
    rels.sort();

    if order.is_empty() && rels.is_empty() {
        return EMPTY_CANONICAL.to_string();
    }
    let mut out = String::with_capacity(texts.iter().map(|t| t.len() + 6).sum::<usize>() + 64);
    out.push_str("{\n  \"nodes\": [");
    for (k, &i) in order.iter().enumerate() {
        let _ = write!(out, "{}\n    {}", if k == 0 { "" } else { "," }, texts[i]);
    }
    out.push_str(if order.is_empty() { "],\n" } else { "\n  ],\n" });
    out.push_str("  \"relationships\": [");
    for (k, (_, text)) in rels.iter().enumerate() {
        let _ = write!(out, "{}\n    {}", if k == 0 { "" } else { "," }, text);
    }
    out.push_str(if rels.is_empty() { "]\n}" } else { "\n  ]\n}" });
    out
}
