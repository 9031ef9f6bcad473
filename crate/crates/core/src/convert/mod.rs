//! Two-phase conversion of a resource stream into a property graph.
//!
//! Phase 1 iterates every resource and commits the nodes of all node
//! templates. Phase 2 resets the iterator, iterates again and commits the
//! relationships, whose endpoints can then refer to any node of phase 1.
//!
//! Within a phase, resources are cut into batches; `workers` threads
//! instantiate batches in parallel while a single committer applies them to
//! the graph in batch order. The graph and the sink output therefore do not
//! depend on the worker count. Wrappers run on the worker threads: a wrapper
//! that keeps state sees resources in an unspecified order unless
//! `workers == 1`.

mod instantiate;
mod pipeline;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::Serialize;

use crate::graph::{GraphError, NodeId, PropertyGraph};
use crate::resource::{ResourceIterator, SourceError};
use crate::schema::LinkedPlan;
use crate::sink::{CommitSink, SinkError};
use crate::wrapper::TransformError;

pub use self::instantiate::{eval, instantiate_node, instantiate_relationship, Built};

use self::pipeline::{drive, NodeCommitter, NodeWork, RelCommitter, RelWork};

pub const DEFAULT_BATCH_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OnError {
    /// Abort at the first failing element.
    #[default]
    Fail,
    /// Log the failure, count it and continue.
    Skip,
}

impl FromStr for OnError {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(OnError::Fail),
            "skip" => Ok(OnError::Skip),
            other => Err(format!("unknown error policy `{other}` (expected fail or skip)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Nodes,
    Relationships,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Nodes => "nodes",
            Phase::Relationships => "relationships",
        })
    }
}

/// Resources finished in the current phase. Reported once with `done == 0`
/// when a phase starts and after every committed batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub phase: Phase,
    pub done: u64,
    pub total: Option<u64>,
}

pub type ProgressFn = Arc<dyn Fn(Progress) + Send + Sync>;

#[derive(Clone)]
pub struct RunConfig {
    pub workers: usize,
    pub batch_size: usize,
    pub on_error: OnError,
    pub progress: Option<ProgressFn>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            batch_size: DEFAULT_BATCH_SIZE,
            on_error: OnError::Fail,
            progress: None,
        }
    }
}

impl RunConfig {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_on_error(mut self, on_error: OnError) -> Self {
        self.on_error = on_error;
        self
    }

    pub fn with_progress(mut self, f: impl Fn(Progress) + Send + Sync + 'static) -> Self {
        self.progress = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunConfig")
            .field("workers", &self.workers)
            .field("batch_size", &self.batch_size)
            .field("on_error", &self.on_error)
            .field("progress", &self.progress.is_some())
            .finish()
    }
}

/// A failure while building or committing one element.
#[derive(Debug, thiserror::Error)]
pub enum ElementError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("resource has no attribute `{0}`")]
    MissingAttribute(String),
    #[error("primary attribute `{0}` is null")]
    PrimaryNull(String),
    #[error("{0}")]
    InvalidLabel(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("{resource}, {template}: {error}")]
    Element {
        resource: String,
        template: String,
        error: ElementError,
    },
    #[error("sink: {0}")]
    Sink(#[from] SinkError),
    #[error("a worker panicked: {0}")]
    WorkerPanic(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    /// Elements produced by templates, plus one per suppressed or failed
    /// template evaluation.
    pub instantiated: u64,
    pub created: u64,
    pub merged: u64,
    pub suppressed: u64,
    pub errors_skipped: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RelationshipCounts {
    /// Source × target pairs of built relationships, plus one per suppressed
    /// or failed template evaluation.
    pub instantiated: u64,
    pub created: u64,
    pub merged: u64,
    pub suppressed: u64,
    pub errors_skipped: u64,
    /// Relationships dropped because a MATCH endpoint found no node.
    pub empty_matches: u64,
    /// Relationships dropped because an identifier endpoint's node template
    /// produced no node for the resource.
    pub unresolved_endpoints: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub phase1_seconds: f64,
    pub phase2_seconds: f64,
}

/// Summary of a run. Serializes to JSON with keys in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub resources_processed: u64,
    pub nodes: NodeCounts,
    pub relationships: RelationshipCounts,
    pub elements_suppressed: u64,
    pub errors_skipped: u64,
    pub timing: Timing,
}

impl RunReport {
    fn finalize(&mut self) {
        self.elements_suppressed = self.nodes.suppressed + self.relationships.suppressed;
        self.errors_skipped = self.nodes.errors_skipped + self.relationships.errors_skipped;
    }
}

/// Node ids recorded in phase 1 for templates that relationships refer to by
/// identifier, keyed by (position in the resource stream, node template
/// index). Only the first node a template produced is kept.
pub type NodeRegistry = HashMap<(u64, usize), NodeId>;

#[derive(Debug)]
pub struct RunOutput {
    pub graph: PropertyGraph,
    pub report: RunReport,
}

/// Converts every resource of `source` with `plan` into a new graph,
/// streaming commits to `sink`.
pub fn run(
    plan: &LinkedPlan,
    source: &mut dyn ResourceIterator,
    sink: &mut dyn CommitSink,
    config: &RunConfig,
) -> Result<RunOutput, ConvertError> {
    run_into(PropertyGraph::new(), plan, source, sink, config)
}

/// Like [`run`], but merges into an existing graph, as a repeated import
/// into a live database would.
pub fn run_into(
    mut graph: PropertyGraph,
    plan: &LinkedPlan,
    source: &mut dyn ResourceIterator,
    sink: &mut dyn CommitSink,
    config: &RunConfig,
) -> Result<RunOutput, ConvertError> {
    if config.workers == 0 {
        return Err(ConvertError::Config("workers must be at least 1".into()));
    }
    if config.batch_size == 0 {
        return Err(ConvertError::Config("batch size must be at least 1".into()));
    }

    let mut report = RunReport::default();
    let mut registry = NodeRegistry::new();

    source.reset()?;
    let started = Instant::now();
    {
        let work = NodeWork { plan };
        let mut committer = NodeCommitter {
            graph: &mut graph,
            sink: &mut *sink,
            registry: &mut registry,
            counts: &mut report.nodes,
            on_error: config.on_error,
        };
        report.resources_processed = drive(source, &work, &mut committer, config, Phase::Nodes)?;
    }
    report.timing.phase1_seconds = started.elapsed().as_secs_f64();

    let (_, relationship_templates) = plan.template_totals();
    if relationship_templates > 0 {
        source.reset()?;
        let started = Instant::now();
        let shared = RwLock::new(graph);
        {
            let work = RelWork {
                plan,
                registry: &registry,
                graph: &shared,
            };
            let mut committer = RelCommitter {
                graph: &shared,
                sink: &mut *sink,
                counts: &mut report.relationships,
                on_error: config.on_error,
            };
            drive(source, &work, &mut committer, config, Phase::Relationships)?;
        }
        graph = shared.into_inner().unwrap_or_else(|e| e.into_inner());
        report.timing.phase2_seconds = started.elapsed().as_secs_f64();
    }

    sink.finish(&graph)?;
    report.finalize();
    Ok(RunOutput { graph, report })
}
