#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value as Json;

use common::mock::MockServer;
use common::{fixture, read_fixture, retail_db};

fn relgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relgraph"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path_arg(prefix: &str, p: &Path) -> String {
    format!("{prefix}{}", p.display())
}

#[test]
fn validate_listing_against_retail_database() {
    let dir = tempfile::tempdir().unwrap();
    let db = retail_db(dir.path());
    let out = relgraph(&[
        "validate",
        fixture("listing2.d2n").to_str().unwrap(),
        "--source",
        &path_arg("sqlite:", &db),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("warning: missing `)`"), "{}", text(&out.stderr));
    assert_eq!(
        text(&out.stdout),
        "ok: 5 entities, 5 node templates, 4 relationship templates\n"
    );
}

#[test]
fn validate_reports_unknown_wrappers_and_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("s.d2n");
    std::fs::write(&schema, "ENTITY(\"Supplier\"):\n  NODE(\"Supplier\"):\n    - name = Shout(Supplier.Name)\n").unwrap();
    let out = relgraph(&["validate", schema.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("error: unknown wrapper `Shout`"), "{}", text(&out.stderr));

    std::fs::write(&schema, "ENTITY(\"Supplier\"):\n  NODE(\"Supplier\"):\n    - name = Supplier.Nmae\n").unwrap();
    let db = retail_db(dir.path());
    let out = relgraph(&["validate", schema.to_str().unwrap(), "--source", &path_arg("sqlite:", &db)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("no column `Nmae`"), "{}", text(&out.stderr));
}

#[test]
fn convert_retail_to_json() {
    let dir = tempfile::tempdir().unwrap();
    let db = retail_db(dir.path());
    let graph = dir.path().join("graph.json");
    let out = relgraph(&[
        "convert",
        fixture("retail.d2n").to_str().unwrap(),
        "--source",
        &path_arg("sqlite:", &db),
        "--sink",
        &path_arg("json:", &graph),
        "--workers",
        "3",
        "--batch-size",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(std::fs::read_to_string(&graph).unwrap(), read_fixture("retail.json"));

    // Top-level keys appear in a fixed order.
    let stdout = text(&out.stdout);
    let keys = ["resources_processed", "nodes", "relationships", "elements_suppressed", "errors_skipped", "timing"];
    let at: Vec<usize> = keys.iter().map(|k| stdout.find(&format!("\n  \"{k}\"")).unwrap()).collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{stdout}");
    let report: Json = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.as_object().unwrap().len(), keys.len());
    assert_eq!(report["resources_processed"], 14);
    assert_eq!(report["nodes"]["created"], 12);
    assert_eq!(report["nodes"]["merged"], 1);
    assert_eq!(report["relationships"]["created"], 13);
}

#[test]
fn convert_empty_csv_directory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("csv");
    std::fs::create_dir(&csv).unwrap();
    let graph = dir.path().join("graph.json");
    let out = relgraph(&[
        "convert",
        fixture("retail.d2n").to_str().unwrap(),
        "--source",
        &path_arg("csv:", &csv),
        "--sink",
        &path_arg("json:", &graph),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(&graph).unwrap(),
        format!("{}\n", relgraph::graph::EMPTY_CANONICAL)
    );
}

fn bad_rows(dir: &Path) -> (String, String) {
    let csv = dir.join("csv");
    std::fs::create_dir(&csv).unwrap();
    std::fs::write(csv.join("Item.csv"), "id,qty\n1,3\n2,lots\n3,4\n").unwrap();
    let schema = dir.join("s.d2n");
    std::fs::write(&schema, "ENTITY(\"Item\"):\n  NODE(\"Item\"):\n    + id = Item.id\n    - qty = INT(Item.qty)\n").unwrap();
    (schema.display().to_string(), path_arg("csv:", &csv))
}

#[test]
fn error_policies_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (schema, source) = bad_rows(dir.path());
    let sink = path_arg("cypher:", &dir.path().join("out.cypher"));

    let out = relgraph(&["convert", &schema, "--source", &source, "--sink", &sink]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("Item#1"), "{}", text(&out.stderr));

    let out = relgraph(&["convert", &schema, "--source", &source, "--sink", &sink, "--on-error", "skip"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: Json = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["errors_skipped"], 1);
    let script = std::fs::read_to_string(dir.path().join("out.cypher")).unwrap();
    assert_eq!(script.lines().count(), 2);
}

#[test]
fn configuration_errors_exit_with_one() {
    let out = relgraph(&["convert", fixture("retail.d2n").to_str().unwrap(), "--source", "sqlite:/nonexistent.db", "--sink", "json:/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = relgraph(&["convert", fixture("retail.d2n").to_str().unwrap(), "--sink", "json:/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1), "missing --source");
    let out = relgraph(&["convert", fixture("retail.d2n").to_str().unwrap(), "--source", "xls:a", "--sink", "json:x"]);
    assert_eq!(out.status.code(), Some(1));
    let out = relgraph(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn http_sink_matches_the_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let db = retail_db(dir.path());
    let server = MockServer::ok();
    let out = Command::new(env!("CARGO_BIN_EXE_relgraph"))
        .args([
            "convert",
            fixture("retail.d2n").to_str().unwrap(),
            "--source",
            &path_arg("sqlite:", &db),
            "--sink",
            &format!("http:{}", server.url),
            "--user",
            "neo4j",
            "--password-env",
            "RELGRAPH_TEST_PASSWORD",
            "--http-batch",
            "10",
        ])
        .env("RELGRAPH_TEST_PASSWORD", "secret")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let bodies: Vec<Json> = server.requests().iter().map(|r| serde_json::from_str(&r.body).unwrap()).collect();
    let transcript: Json = serde_json::from_str(&read_fixture("retail_http.json")).unwrap();
    assert_eq!(Json::Array(bodies), transcript);
    assert!(server
        .requests()
        .iter()
        .all(|r| r.header("authorization") == Some("Basic bmVvNGo6c2VjcmV0")));
}

#[test]
fn missing_password_variable_is_a_configuration_error() {
    let out = relgraph(&[
        "convert",
        fixture("retail.d2n").to_str().unwrap(),
        "--source",
        "sqlite:whatever.db",
        "--sink",
        "http:http://127.0.0.1:9",
        "--password-env",
        "RELGRAPH_SURELY_UNSET",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_renames() {
    let out = relgraph(&["bench", "--edits", "1000", "--seed", "3", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: Json = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["relationship_types"]["RENAMED_TO"], 100);
    assert_eq!(report["truth"]["renames"], 100);
    assert!(report["rows_per_second"].as_f64().unwrap() > 0.0);
    assert!(text(&out.stderr).contains("rows/s"));
}
