//! Fixtures and test oracles shared by the integration tests.
#![allow(dead_code)]

pub mod mock;
pub mod replay;

use std::path::{Path, PathBuf};

use relgraph::convert::{run, RunConfig, RunOutput};
use relgraph::presets;
use relgraph::resource::sqlite_iterator;
use relgraph::sink::CommitSink;
use relgraph::{link_plan, parse_schema, LinkedPlan, WrapperRegistry};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Builds the retail SQLite database inside `dir`.
pub fn retail_db(dir: &Path) -> PathBuf {
    let path = dir.join("retail.db");
    let conn = rusqlite::Connection::open(&path).unwrap();
    conn.execute_batch(&read_fixture("retail.sql")).unwrap();
    path
}

pub fn retail_registry() -> WrapperRegistry {
    let mut r = WrapperRegistry::with_builtins();
    presets::register("retail", &mut r).unwrap();
    r
}

pub fn link(text: &str, registry: &WrapperRegistry) -> LinkedPlan {
    let plan = parse_schema(text).unwrap_or_else(|e| panic!("{}", e.render("schema")));
    link_plan(&plan, registry).unwrap_or_else(|e| panic!("{}", e.render("schema")))
}

pub fn retail_plan() -> LinkedPlan {
    link(&read_fixture("retail.d2n"), &retail_registry())
}

/// Converts the retail fixture; the temp dir holding the database is
/// dropped before returning.
pub fn convert_retail(config: &RunConfig, sink: &mut dyn CommitSink) -> RunOutput {
    let dir = tempfile::tempdir().unwrap();
    let db = retail_db(dir.path());
    let mut source = sqlite_iterator(&db, None).unwrap();
    run(&retail_plan(), &mut source, sink, config).unwrap()
}
