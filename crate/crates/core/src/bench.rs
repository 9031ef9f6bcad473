//! Synthetic commit history and the benchmark conversion over it.
//!
//! The dataset mimics a version-control export: a `commits` table and an
//! `edits` table whose `edit_type` becomes the relationship type, with a
//! `RENAMED_TO` edge for every rename.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::{params, Connection};
use serde::Serialize;

use crate::convert::{run, ConvertError, RunConfig, RunReport};
use crate::graph::PropertyGraph;
use crate::presets;
use crate::resource::{sqlite_iterator, SourceError};
use crate::schema::{link_plan, parse_schema};
use crate::sink::NullSink;
use crate::wrapper::WrapperRegistry;

/// Schema shipped for the benchmark; needs the `bench` wrapper bundle.
pub const BENCH_SCHEMA: &str = include_str!("bench.d2n");

pub const EDIT_TYPES: [&str; 4] = ["add", "modify", "delete", "rename"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchParams {
    pub commits: u64,
    pub edits: u64,
    /// Fraction of edits that are renames; the count is rounded to nearest.
    pub rename_fraction: f64,
    pub authors: u64,
    pub files: u64,
    pub seed: u64,
}

impl BenchParams {
    /// Sizes the other tables from the edit count.
    pub fn for_edits(edits: u64, seed: u64) -> Self {
        BenchParams {
            commits: (edits / 5).max(1),
            edits,
            rename_fraction: 0.1,
            authors: (edits / 200).clamp(1, 500),
            files: (edits / 10).max(1),
            seed,
        }
    }
}

/// What the generator wrote, for checking the converted graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    pub commits: u64,
    pub edits: u64,
    pub renames: u64,
    /// Count of each `edit_type` value.
    pub edit_types: BTreeMap<String, u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("cannot write {path}: {source}")]
    Generate {
        path: String,
        #[source]
        source: rusqlite::Error,
    },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error("benchmark schema: {0}")]
    Schema(String),
}

/// Writes a fresh dataset to `path`, replacing any existing tables.
pub fn generate(path: &Path, params: &BenchParams) -> Result<GroundTruth, BenchError> {
    if params.edits > 0 && params.commits == 0 {
        return Err(BenchError::Params("edits need at least one commit".into()));
    }
    if params.authors == 0 || params.files == 0 {
        return Err(BenchError::Params("authors and files must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&params.rename_fraction) {
        return Err(BenchError::Params("rename fraction must lie in [0, 1]".into()));
    }
    let err = |source| BenchError::Generate {
        path: path.display().to_string(),
        source,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut conn = Connection::open(path).map_err(err)?;
    conn.execute_batch(
        "DROP TABLE IF EXISTS commits;
         DROP TABLE IF EXISTS edits;
         CREATE TABLE commits (hash TEXT NOT NULL, author TEXT NOT NULL, timestamp INTEGER NOT NULL);
         CREATE TABLE edits (commit_hash TEXT NOT NULL, filename TEXT NOT NULL, new_filename TEXT, edit_type TEXT NOT NULL);",
    )
    .map_err(err)?;

    let mut truth = GroundTruth {
        commits: params.commits,
        edits: params.edits,
        ..GroundTruth::default()
    };
    let tx = conn.transaction().map_err(err)?;
    let mut hashes = Vec::with_capacity(params.commits as usize);
    {
        let mut insert = tx
            .prepare("INSERT INTO commits (hash, author, timestamp) VALUES (?1, ?2, ?3)")
            .map_err(err)?;
        for i in 0..params.commits {
            let hash = format!("{i:08x}{:08x}", rng.random::<u32>());
            let author = format!("author{}", rng.random_range(0..params.authors));
            let timestamp = 1_600_000_000 + 60 * i as i64 + rng.random_range(0..60);
            insert.execute(params![hash, author, timestamp]).map_err(err)?;
            hashes.push(hash);
        }
    }

    let renames = (params.edits as f64 * params.rename_fraction).round() as u64;
    let mut is_rename: Vec<bool> = (0..params.edits).map(|i| i < renames).collect();
    is_rename.shuffle(&mut rng);
    truth.renames = renames;
    {
        let mut insert = tx
            .prepare("INSERT INTO edits (commit_hash, filename, new_filename, edit_type) VALUES (?1, ?2, ?3, ?4)")
            .map_err(err)?;
        for rename in is_rename {
            let commit = &hashes[rng.random_range(0..hashes.len())];
            let file = rng.random_range(0..params.files);
            let (new_name, kind) = if rename {
                // Renamed-to files get their own name space.
                (Some(format!("src/renamed{}.rs", rng.random_range(0..params.files))), "rename")
            } else {
                (None, EDIT_TYPES[rng.random_range(0..3)])
            };
            insert
                .execute(params![commit, format!("src/file{file}.rs"), new_name, kind])
                .map_err(err)?;
            *truth.edit_types.entry(kind.to_string()).or_default() += 1;
        }
    }
    tx.commit().map_err(err)?;
    Ok(truth)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub params: BenchParams,
    pub workers: usize,
    pub batch_size: usize,
    /// Rows of both tables.
    pub rows: u64,
    pub rows_per_second: f64,
    pub total_seconds: f64,
    pub truth: GroundTruth,
    /// Relationship count per type in the converted graph.
    pub relationship_types: BTreeMap<String, u64>,
    pub run: RunReport,
}

pub fn relationship_type_counts(graph: &PropertyGraph) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in graph.relationships() {
        *out.entry(r.rel_type.clone()).or_default() += 1;
    }
    out
}

/// Converts a generated dataset with [`BENCH_SCHEMA`] and no sink.
pub fn convert_dataset(path: &Path, config: &RunConfig) -> Result<(PropertyGraph, RunReport, f64), BenchError> {
    let mut registry = WrapperRegistry::with_builtins();
    presets::register("bench", &mut registry).map_err(|e| BenchError::Schema(e.to_string()))?;
    let plan = parse_schema(BENCH_SCHEMA).map_err(|e| BenchError::Schema(e.render("bench.d2n")))?;
    let plan = link_plan(&plan, &registry).map_err(|e| BenchError::Schema(e.render("bench.d2n")))?;
    let mut source = sqlite_iterator(path, Some(&["commits", "edits"]))?;
    let started = Instant::now();
    let out = run(&plan, &mut source, &mut NullSink, config)?;
    Ok((out.graph, out.report, started.elapsed().as_secs_f64()))
}

/// Generates a dataset at `path`, converts it and measures throughput.
pub fn run_bench(path: &Path, params: &BenchParams, config: &RunConfig) -> Result<BenchReport, BenchError> {
    let truth = generate(path, params)?;
    let (graph, run, total_seconds) = convert_dataset(path, config)?;
    let rows = params.commits + params.edits;
    Ok(BenchReport {
        params: params.clone(),
        workers: config.workers,
        batch_size: config.batch_size,
        rows,
        rows_per_second: rows as f64 / total_seconds.max(f64::EPSILON),
        total_seconds,
        truth,
        relationship_types: relationship_type_counts(&graph),
        run,
    })
}
