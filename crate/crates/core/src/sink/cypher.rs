//! Cypher script output, one statement per committed element.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use super::{Commit, CommitSink, SinkError};
use crate::graph::{GraphNode, PropertyGraph};
use crate::value::{format_float, Value};

/// Label, type or key name as it must appear in a statement: bare when it is
/// a plain identifier, otherwise backtick-quoted with doubled backticks.
pub fn cypher_identifier(name: &str) -> Cow<'_, str> {
    let mut chars = name.chars();
    let plain = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    };
    if plain {
        Cow::Borrowed(name)
    } else {
        Cow::Owned(format!("`{}`", name.replace('`', "``")))
    }
}

/// Literal for a property value. `None` for Null, which is never written.
pub fn cypher_value(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => return None,
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) if f.is_nan() => "(0.0 / 0.0)".to_string(),
        Value::Float(f) if f.is_infinite() => format!("({}1.0 / 0.0)", if *f < 0.0 { "-" } else { "" }),
        Value::Float(f) => format_float(*f),
        Value::Text(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('\'');
            for c in s.chars() {
                match c {
                    '\'' => out.push_str("\\'"),
                    '\\' => out.push_str("\\\\"),
                    // Keeps every statement on one line.
                    '\n' => out.push_str("\\n"),
                    '\r' => out.push_str("\\r"),
                    c => out.push(c),
                }
            }
            out.push('\'');
            out
        }
    })
}

fn map_literal<'a>(entries: impl Iterator<Item = (&'a String, &'a Value)>) -> String {
    let mut out = String::from("{");
    for (k, v) in entries {
        let Some(v) = cypher_value(v) else { continue };
        if out.len() > 1 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: {v}", cypher_identifier(k));
    }
    out.push('}');
    out
}

fn labels(list: &[String]) -> String {
    list.iter().map(|l| format!(":{}", cypher_identifier(l))).collect()
}

fn key_pattern(key: &str, value: &Value) -> String {
    format!("{{{}: {}}}", cypher_identifier(key), cypher_value(value).unwrap_or_default())
}

fn without<'a>(attrs: &'a BTreeMap<String, Value>, key: &'a str) -> impl Iterator<Item = (&'a String, &'a Value)> {
    attrs.iter().filter(move |(k, _)| k.as_str() != key)
}

fn endpoint(var: &str, node: &GraphNode) -> Option<String> {
    let (key, value) = node.primary_key.as_ref()?;
    Some(format!("({var}{} {})", labels(&node.labels[..1]), key_pattern(key, value)))
}

/// The statement for one commit, or `Err` with a comment line when a
/// relationship endpoint has no primary attribute to address it by.
fn statement(commit: &Commit<'_>, graph: &PropertyGraph) -> Result<String, String> {
    match *commit {
        Commit::Node { node, .. } => Ok(match node.primary_pair() {
            None => format!("CREATE ({} {});", labels(&node.labels), map_literal(node.attributes.iter())),
            Some((key, value)) => {
                let mut s = format!(
                    "MERGE (n{} {}) SET n += {}",
                    labels(&node.labels[..1]),
                    key_pattern(key, value),
                    map_literal(without(&node.attributes, key)),
                );
                if node.labels.len() > 1 {
                    let _ = write!(s, " SET n{}", labels(&node.labels[1..]));
                }
                s.push(';');
                s
            }
        }),
        Commit::Relationship {
            relationship: rel,
            source,
            target,
            ..
        } => {
            let rel_type = cypher_identifier(&rel.rel_type);
            let a = graph.node(source).and_then(|n| endpoint("a", n));
            let b = graph.node(target).and_then(|n| endpoint("b", n));
            let (Some(a), Some(b)) = (a, b) else {
                return Err(format!("// unkeyed endpoint, not emitted: ({source})-[:{rel_type}]->({target})"));
            };
            Ok(match rel.primary_pair() {
                None => format!(
                    "MATCH {a}, {b} CREATE (a)-[:{rel_type} {}]->(b);",
                    map_literal(rel.attributes.iter())
                ),
                Some((key, value)) => format!(
                    "MATCH {a}, {b} MERGE (a)-[r:{rel_type} {}]->(b) SET r += {};",
                    key_pattern(key, value),
                    map_literal(without(&rel.attributes, key)),
                ),
            })
        }
    }
}

/// Writes a Cypher script that rebuilds the graph when run in order.
///
/// Relationships whose endpoints lack a primary attribute cannot be
/// addressed from a script; they are written as a comment line and logged.
pub struct CypherSink<W: Write + Send> {
    out: W,
    unkeyed: u64,
}

impl<W: Write + Send> CypherSink<W> {
    pub fn new(out: W) -> Self {
        CypherSink { out, unkeyed: 0 }
    }

    /// Relationships written as comments so far.
    pub fn unkeyed_endpoints(&self) -> u64 {
        self.unkeyed
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write + Send> CommitSink for CypherSink<W> {
    fn on_commit(&mut self, commit: &Commit<'_>, graph: &PropertyGraph) -> Result<(), SinkError> {
        let line = match statement(commit, graph) {
            Ok(s) => s,
            Err(comment) => {
                log::warn!("cypher sink: relationship endpoint has no primary attribute; {comment}");
                self.unkeyed += 1;
                comment
            }
        };
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    fn finish(&mut self, _: &PropertyGraph) -> Result<(), SinkError> {
        self.out.flush()?;
        Ok(())
    }
}
