mod common;

use proptest::prelude::*;
use relgraph::convert::{run, ConvertError, RunConfig};
use relgraph::resource::VecIterator;
use relgraph::sink::{CypherSink, HttpConfig, HttpSink, HttpStatement, JsonSink, SinkError};
use relgraph::{canonical_form, Resource, WrapperRegistry};
use serde_json::Value as Json;

use common::mock::{MockServer, OK_BODY};
use common::{link, replay::replay};

const SCHEMA: &str = "ENTITY(\"P\"):\n  NODE(\"P\", P.label) p:\n    + id = P.id\n    - name = P.name\n    - score = P.score\n  RELATIONSHIP(p, \"NEXT\", MATCH(\"P\", id=P.next)):\n    - note = P.name\n  RELATIONSHIP(p, \"KEYED\", MATCH(\"P\", id=P.next)):\n    + k = P.k\n";

fn rows() -> impl Strategy<Value = Vec<Resource>> {
    let text = prop_oneof![
        "[a-z ]{0,6}",
        Just("it's".to_string()),
        Just("back\\slash".to_string()),
        Just("`tick`".to_string()),
        Just("two\nlines".to_string()),
        Just("naïve ☃".to_string()),
        Just("x'}) DETACH DELETE n //".to_string()),
    ];
    let label = prop_oneof![Just("Plain"), Just("Two words"), Just("a`b"), Just("_x1")];
    let row = (0i64..5, 0i64..5, text, label, -2.5f64..2.5, 0i64..2);
    prop::collection::vec(row, 0..14).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (id, next, name, label, score, k))| {
                Resource::new("P", i as u64)
                    .with("id", id)
                    .with("next", next)
                    .with("name", name)
                    .with("label", label)
                    .with("score", score)
                    .with("k", k)
            })
            .collect()
    })
}

fn config() -> RunConfig {
    RunConfig::default().with_workers(2).with_batch_size(3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replayed_script_rebuilds_the_graph(rows in rows()) {
        let plan = link(SCHEMA, &WrapperRegistry::with_builtins());
        let mut sink = CypherSink::new(Vec::new());
        let out = run(&plan, &mut VecIterator::new(rows), &mut sink, &config()).unwrap();
        prop_assert_eq!(sink.unkeyed_endpoints(), 0);
        let script = String::from_utf8(sink.into_inner()).unwrap();
        prop_assert!(script.lines().all(|l| l.ends_with(';')));
        prop_assert_eq!(canonical_form(&replay(&script)), canonical_form(&out.graph));
    }

    #[test]
    fn http_statements_never_contain_values(rows in rows()) {
        let plan = link(SCHEMA, &WrapperRegistry::with_builtins());
        let server = MockServer::ok();
        let mut cfg = HttpConfig::new(server.url.clone(), "neo4j");
        cfg.batch_size = 4;
        let mut sink = HttpSink::new(cfg);
        let out = run(&plan, &mut VecIterator::new(rows), &mut sink, &config()).unwrap();
        let statements: Vec<Json> = server
            .requests()
            .iter()
            .flat_map(|r| serde_json::from_str::<Json>(&r.body).unwrap()["statements"].as_array().unwrap().clone())
            .collect();
        prop_assert_eq!(statements.len() as u64, out.report.nodes.created + out.report.nodes.merged + out.report.relationships.created + out.report.relationships.merged);
        for s in &statements {
            let text = s["statement"].as_str().unwrap();
            // Only labels and keys reach the text, and none of the generated
            // labels contain a quote.
            prop_assert!(!text.contains('\''), "{}", text);
            prop_assert!(!text.contains("DELETE"), "{}", text);
            prop_assert!(!text.contains("two\nlines"));
            prop_assert!(s["parameters"].is_object());
        }
    }
}

#[test]
fn three_statements_with_batch_two_make_two_requests() {
    let plan = link(
        "ENTITY(\"S\"):\n  NODE(\"S\"):\n    + id = S.id\n",
        &WrapperRegistry::with_builtins(),
    );
    let rows = (0..3).map(|i| Resource::new("S", i).with("id", i as i64)).collect();
    let server = MockServer::ok();
    let mut cfg = HttpConfig::new(server.url.clone(), "graph");
    cfg.batch_size = 2;
    cfg.user = Some("neo4j".into());
    cfg.password = Some("pw".into());
    let mut sink = HttpSink::new(cfg);
    run(&plan, &mut VecIterator::new(rows), &mut sink, &config()).unwrap();
    assert_eq!(sink.requests(), 2);
    let reqs = server.requests();
    assert_eq!(reqs.len(), 2);
    for r in &reqs {
        assert_eq!(r.method, "POST");
        assert_eq!(r.path, "/db/graph/tx/commit");
        assert_eq!(r.header("content-type"), Some("application/json"));
        // base64("neo4j:pw")
        assert_eq!(r.header("authorization"), Some("Basic bmVvNGo6cHc="));
    }
    let sizes: Vec<usize> = reqs
        .iter()
        .map(|r| serde_json::from_str::<Json>(&r.body).unwrap()["statements"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, [2, 1]);
}

#[test]
fn empty_graph_sends_nothing() {
    let plan = link("ENTITY(\"S\"):\n  NODE(\"S\"):\n", &WrapperRegistry::with_builtins());
    let server = MockServer::ok();
    let mut sink = HttpSink::new(HttpConfig::new(server.url.clone(), "neo4j"));
    run(&plan, &mut VecIterator::new(Vec::new()), &mut sink, &config()).unwrap();
    assert!(server.requests().is_empty());
}

fn single_node_run(server: &MockServer) -> ConvertError {
    let plan = link("ENTITY(\"S\"):\n  NODE(\"S\"):\n", &WrapperRegistry::with_builtins());
    let mut sink = HttpSink::new(HttpConfig::new(server.url.clone(), "neo4j"));
    run(&plan, &mut VecIterator::new(vec![Resource::new("S", 0)]), &mut sink, &config()).unwrap_err()
}

#[test]
fn remote_errors_carry_the_first_code() {
    let server = MockServer::start(|_| {
        (
            200,
            r#"{"results":[],"errors":[{"code":"Neo.ClientError.Statement.SyntaxError","message":"bad"},{"code":"other","message":"x"}]}"#.into(),
        )
    });
    match single_node_run(&server) {
        ConvertError::Sink(SinkError::Remote { code, message }) => {
            assert_eq!(code, "Neo.ClientError.Statement.SyntaxError");
            assert_eq!(message, "bad");
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn http_status_failures_are_transport_errors() {
    let server = MockServer::start(|_| (503, OK_BODY.into()));
    let err = single_node_run(&server);
    assert!(matches!(&err, ConvertError::Sink(SinkError::Transport(m)) if m.contains("503")), "{err}");
}

#[test]
fn unreachable_server_is_a_transport_error() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let plan = link("ENTITY(\"S\"):\n  NODE(\"S\"):\n", &WrapperRegistry::with_builtins());
    let mut sink = HttpSink::new(HttpConfig::new(format!("http://127.0.0.1:{port}"), "neo4j"));
    let err = run(&plan, &mut VecIterator::new(vec![Resource::new("S", 0)]), &mut sink, &config()).unwrap_err();
    assert!(matches!(err, ConvertError::Sink(SinkError::Transport(_))));
}

#[test]
fn json_output_matches_the_graph() {
    let mut sink = JsonSink::new(Vec::new());
    let out = common::convert_retail(&config(), &mut sink);
    let text = String::from_utf8(sink.into_inner()).unwrap();
    assert_eq!(text, canonical_form(&out.graph) + "\n");
    serde_json::from_str::<Json>(&text).unwrap();
}

#[test]
fn statement_text_does_not_depend_on_values() {
    use relgraph::graph::Upserted;
    use relgraph::sink::Commit;
    use relgraph::subgraph::PendingNode;
    use relgraph::{PropertyGraph, Value};

    let text_for = |name: &str| {
        let mut g = PropertyGraph::new();
        let node = PendingNode {
            labels: vec!["Product".into()],
            attributes: [("name".to_string(), Value::from(name))].into_iter().collect(),
            primary: Some("name".into()),
            template_index: 0,
        };
        let outcome: Upserted<_> = g
            .upsert_node(&node.labels, node.attributes.clone(), Some(("name".into(), Value::from(name))))
            .unwrap();
        HttpStatement::for_commit(&Commit::Node { node: &node, outcome }, &g).unwrap()
    };
    let plain = text_for("x");
    let nasty = text_for("'}) MATCH (m) DETACH DELETE m //`");
    assert_eq!(plain.statement, nasty.statement);
    assert_ne!(plain.parameters, nasty.parameters);
}
