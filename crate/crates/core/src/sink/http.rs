//! Neo4j HTTP transactional endpoint.
//!
//! Statements are batched and POSTed to `<url>/db/<database>/tx/commit`,
//! one request at a time in commit order. Every value travels as a
//! parameter; only labels, types and keys appear in statement text.

use std::time::Duration;

use base64::Engine as _;
use serde::Serialize;
use serde_json::{Map, Value as Json};

use super::cypher::cypher_identifier;
use super::{Commit, CommitSink, SinkError};
use crate::graph::{GraphNode, PropertyGraph};
use crate::value::Value;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Server base URL, e.g. `http://localhost:7474`.
    pub url: String,
    pub database: String,
    pub user: Option<String>,
    pub password: Option<String>,
    /// Maximum statements per request.
    pub batch_size: usize,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>, database: impl Into<String>) -> Self {
        HttpConfig {
            url: url.into(),
            database: database.into(),
            user: None,
            password: None,
            batch_size: 1000,
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/db/{}/tx/commit", self.url.trim_end_matches('/'), self.database)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HttpStatement {
    pub statement: String,
    pub parameters: Map<String, Json>,
}

fn props<'a>(attrs: impl Iterator<Item = (&'a String, &'a Value)>) -> Json {
    Json::Object(
        attrs
            .filter(|(_, v)| !v.is_null())
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect(),
    )
}

fn labels(list: &[String]) -> String {
    list.iter().map(|l| format!(":{}", cypher_identifier(l))).collect()
}

fn endpoint(var: &str, param: &str, node: &GraphNode) -> Option<(String, Json)> {
    let (key, value) = node.primary_key.as_ref()?;
    let pattern = format!("({var}{} {{{}: ${param}}})", labels(&node.labels[..1]), cypher_identifier(key));
    Some((pattern, value.to_json()))
}

impl HttpStatement {
    /// The parameterized statement for one commit; `None` for a relationship
    /// with an endpoint that has no primary attribute.
    pub fn for_commit(commit: &Commit<'_>, graph: &PropertyGraph) -> Option<Self> {
        let mut parameters = Map::new();
        let statement = match *commit {
            Commit::Node { node, .. } => match node.primary_pair() {
                None => {
                    parameters.insert("props".into(), props(node.attributes.iter()));
                    format!("CREATE (n{}) SET n = $props", labels(&node.labels))
                }
                Some((key, value)) => {
                    parameters.insert("key".into(), value.to_json());
                    parameters.insert("props".into(), props(node.attributes.iter().filter(|(k, _)| *k != key)));
                    let mut s = format!(
                        "MERGE (n{} {{{}: $key}}) SET n += $props",
                        labels(&node.labels[..1]),
                        cypher_identifier(key)
                    );
                    if node.labels.len() > 1 {
                        s.push_str(&format!(" SET n{}", labels(&node.labels[1..])));
                    }
                    s
                }
            },
            Commit::Relationship {
                relationship: rel,
                source,
                target,
                ..
            } => {
                let (a, a_key) = endpoint("a", "source", graph.node(source)?)?;
                let (b, b_key) = endpoint("b", "target", graph.node(target)?)?;
                parameters.insert("source".into(), a_key);
                parameters.insert("target".into(), b_key);
                let rel_type = cypher_identifier(&rel.rel_type);
                match rel.primary_pair() {
                    None => {
                        parameters.insert("props".into(), props(rel.attributes.iter()));
                        format!("MATCH {a}, {b} CREATE (a)-[r:{rel_type}]->(b) SET r = $props")
                    }
                    Some((key, value)) => {
                        parameters.insert("key".into(), value.to_json());
                        parameters.insert("props".into(), props(rel.attributes.iter().filter(|(k, _)| *k != key)));
                        format!(
                            "MATCH {a}, {b} MERGE (a)-[r:{rel_type} {{{}: $key}}]->(b) SET r += $props",
                            cypher_identifier(key)
                        )
                    }
                }
            }
        };
        Some(HttpStatement { statement, parameters })
    }
}

/// Sends the commit stream to a Neo4j server.
pub struct HttpSink {
    config: HttpConfig,
    agent: ureq::Agent,
    pending: Vec<HttpStatement>,
    requests: u64,
    unkeyed: u64,
}

impl HttpSink {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        HttpSink {
            config,
            agent,
            pending: Vec::new(),
            requests: 0,
            unkeyed: 0,
        }
    }

    /// Requests sent so far.
    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Relationships not sent because an endpoint had no primary attribute.
    pub fn unkeyed_endpoints(&self) -> u64 {
        self.unkeyed
    }

    fn flush(&mut self) -> Result<(), SinkError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let statements = std::mem::take(&mut self.pending);
        let body = serde_json::json!({ "statements": statements }).to_string();
        let url = self.config.endpoint();
        let mut request = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .header("Accept", "application/json");
        if let Some(user) = &self.config.user {
            let secret = format!("{user}:{}", self.config.password.as_deref().unwrap_or(""));
            let token = base64::engine::general_purpose::STANDARD.encode(secret);
            request = request.header("Authorization", format!("Basic {token}"));
        }
        self.requests += 1;
        let mut response = request
            .send(body)
            .map_err(|e| SinkError::Transport(format!("POST {url}: {e}")))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| SinkError::Transport(format!("reading response from {url}: {e}")))?;
        if !status.is_success() {
            return Err(SinkError::Transport(format!("POST {url}: HTTP {}", status.as_u16())));
        }
        let parsed: Json = serde_json::from_str(&text)
            .map_err(|e| SinkError::Transport(format!("response from {url} is not JSON: {e}")))?;
        if let Some(first) = parsed.get("errors").and_then(Json::as_array).and_then(|e| e.first()) {
            let field = |name: &str| first.get(name).and_then(Json::as_str).unwrap_or("").to_string();
            return Err(SinkError::Remote {
                code: field("code"),
                message: field("message"),
            });
        }
        Ok(())
    }
}

impl CommitSink for HttpSink {
    fn on_commit(&mut self, commit: &Commit<'_>, graph: &PropertyGraph) -> Result<(), SinkError> {
        match HttpStatement::for_commit(commit, graph) {
            Some(s) => self.pending.push(s),
            None => {
                log::warn!("http sink: relationship endpoint has no primary attribute, not sent");
                self.unkeyed += 1;
            }
        }
        if self.pending.len() >= self.config.batch_size.max(1) {
            self.flush()?;
        }
        Ok(())
    }

    fn finish(&mut self, _: &PropertyGraph) -> Result<(), SinkError> {
        self.flush()
    }
}
