//! Replays a Cypher script made of exactly the statement shapes the script
//! sink emits. Anything else is a test failure.

use std::collections::BTreeMap;

use relgraph::{PropertyGraph, Value};

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    line: usize,
}

type Props = BTreeMap<String, Value>;

impl Parser<'_> {
    fn fail(&self, what: &str) -> ! {
        let rest = String::from_utf8_lossy(&self.s[self.i..]);
        panic!("line {}: expected {what} at `{rest}`", self.line)
    }

    fn ws(&mut self) {
        while self.s.get(self.i) == Some(&b' ') {
            self.i += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(tok.as_bytes()) {
            self.i += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) {
        if !self.eat(tok) {
            self.fail(tok)
        }
    }

    fn ident(&mut self) -> String {
        self.ws();
        if self.s.get(self.i) == Some(&b'`') {
            let mut out = Vec::new();
            self.i += 1;
            loop {
                match self.s.get(self.i) {
                    Some(b'`') if self.s.get(self.i + 1) == Some(&b'`') => {
                        out.push(b'`');
                        self.i += 2;
                    }
                    Some(b'`') => {
                        self.i += 1;
                        return String::from_utf8(out).unwrap();
                    }
                    Some(&c) => {
                        out.push(c);
                        self.i += 1;
                    }
                    None => self.fail("closing backtick"),
                }
            }
        }
        let start = self.i;
        while self
            .s
            .get(self.i)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.i += 1;
        }
        if start == self.i || self.s[start].is_ascii_digit() {
            self.fail("identifier")
        }
        String::from_utf8(self.s[start..self.i].to_vec()).unwrap()
    }

    fn labels(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while self.eat(":") {
            out.push(self.ident());
        }
        out
    }

    fn value(&mut self) -> Value {
        self.ws();
        if self.eat("(0.0 / 0.0)") {
            return Value::Float(f64::NAN);
        }
        if self.eat("(1.0 / 0.0)") {
            return Value::Float(f64::INFINITY);
        }
        if self.eat("(-1.0 / 0.0)") {
            return Value::Float(f64::NEG_INFINITY);
        }
        if self.eat("true") {
            return Value::Bool(true);
        }
        if self.eat("false") {
            return Value::Bool(false);
        }
        if self.eat("'") {
            let mut out = Vec::new();
            loop {
                match self.s.get(self.i) {
                    Some(b'\\') => {
                        out.push(match self.s.get(self.i + 1) {
                            Some(b'\'') => b'\'',
                            Some(b'\\') => b'\\',
                            Some(b'n') => b'\n',
                            Some(b'r') => b'\r',
                            _ => self.fail("escape"),
                        });
                        self.i += 2;
                    }
                    Some(b'\'') => {
                        self.i += 1;
                        return Value::Text(String::from_utf8(out).unwrap());
                    }
                    Some(&c) => {
                        out.push(c);
                        self.i += 1;
                    }
                    None => self.fail("closing quote"),
                }
            }
        }
        let start = self.i;
        while self
            .s
            .get(self.i)
            .is_some_and(|c| c.is_ascii_digit() || b"-+.e".contains(c))
        {
            self.i += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        if text.contains(['.', 'e']) {
            Value::Float(text.parse().unwrap_or_else(|_| self.fail("float")))
        } else {
            Value::Int(text.parse().unwrap_or_else(|_| self.fail("number")))
        }
    }

    fn map(&mut self) -> Props {
        self.expect("{");
        let mut out = Props::new();
        if self.eat("}") {
            return out;
        }
        loop {
            let k = self.ident();
            self.expect(":");
            let v = self.value();
            assert!(out.insert(k, v).is_none(), "line {}: duplicate key", self.line);
            if self.eat("}") {
                return out;
            }
            self.expect(",");
        }
    }

    /// `{key: value}` with exactly one entry.
    fn key(&mut self) -> (String, Value) {
        let m = self.map();
        assert_eq!(m.len(), 1, "line {}: key pattern must have one entry", self.line);
        m.into_iter().next().unwrap()
    }

    /// `(var:Label {key: value})`
    fn keyed_node(&mut self, var: &str, g: &PropertyGraph) -> relgraph::NodeId {
        self.expect("(");
        self.expect(var);
        let labels = self.labels();
        assert_eq!(labels.len(), 1, "line {}", self.line);
        let key = self.key();
        self.expect(")");
        let found = g.match_nodes(&labels, &[key]);
        assert_eq!(found.len(), 1, "line {}: endpoint must match one node", self.line);
        found[0]
    }

    fn end(&mut self) {
        self.expect(";");
        self.ws();
        if self.i != self.s.len() {
            self.fail("end of line")
        }
    }
}

/// Applies every statement of `script` to a fresh graph.
pub fn replay(script: &str) -> PropertyGraph {
    let mut g = PropertyGraph::new();
    for (n, line) in script.lines().enumerate() {
        if line.starts_with("//") {
            continue;
        }
        let mut p = Parser {
            s: line.as_bytes(),
            i: 0,
            line: n + 1,
        };
        if p.eat("CREATE (") {
            let labels = p.labels();
            let props = p.map();
            p.expect(")");
            p.end();
            g.upsert_node(&labels, props, None).unwrap();
        } else if p.eat("MERGE (n") {
            let mut labels = p.labels();
            let (k, v) = p.key();
            p.expect(")");
            p.expect("SET n +=");
            let mut props = p.map();
            if p.eat("SET n") {
                labels.extend(p.labels());
            }
            p.end();
            props.insert(k.clone(), v.clone());
            g.upsert_node(&labels, props, Some((k, v))).unwrap();
        } else if p.eat("MATCH") {
            let a = p.keyed_node("a", &g);
            p.expect(",");
            let b = p.keyed_node("b", &g);
            if p.eat("CREATE (a)-[") {
                let t = p.labels();
                let props = p.map();
                p.expect("]->(b)");
                p.end();
                g.upsert_relationship(a, &t[0], b, props, None).unwrap();
            } else {
                p.expect("MERGE (a)-[r");
                let t = p.labels();
                let (k, v) = p.key();
                p.expect("]->(b) SET r +=");
                let mut props = p.map();
                p.end();
                props.insert(k.clone(), v.clone());
                g.upsert_relationship(a, &t[0], b, props, Some((k, v))).unwrap();
            }
        } else {
            p.fail("CREATE, MERGE or MATCH")
        }
    }
    g
}
