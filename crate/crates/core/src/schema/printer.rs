use std::fmt::Write;

use super::{AttributeSpec, ConversionPlan, NodeRef, ValueExpr, WrapperName};
use crate::value::{format_float, Value};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn literal(v: &Value) -> String {
    match v {
        Value::Text(s) => quote(s),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        Value::Bool(b) => b.to_string(),
        // Not expressible in the language; only reachable for hand-built plans.
        Value::Null => "\"\"".to_string(),
    }
}

pub(crate) fn expr(e: &ValueExpr) -> String {
    match e {
        ValueExpr::Literal(v) => literal(v),
        ValueExpr::AttrRef { prefix, attr, .. } => format!("{prefix}.{attr}"),
        ValueExpr::WrapperCall { wrapper, arg, .. } => format!("{wrapper}({})", expr(arg)),
    }
}

fn list(items: &[ValueExpr]) -> String {
    items.iter().map(expr).collect::<Vec<_>>().join(", ")
}

fn node_ref(r: &NodeRef) -> String {
    match r {
        NodeRef::Identifier { name, .. } => name.clone(),
        NodeRef::Match(m) => {
            let mut parts: Vec<String> = m.labels.iter().map(expr).collect();
            parts.extend(m.conditions.iter().map(|(k, v)| format!("{k}={}", expr(v))));
            format!("MATCH({})", parts.join(", "))
        }
    }
}

fn wrap(wrappers: &[WrapperName], inner: String) -> String {
    wrappers
        .iter()
        .rev()
        .fold(inner, |acc, w| format!("{}({acc})", w.name))
}

fn attributes(out: &mut String, attrs: &[AttributeSpec]) {
    for a in attrs {
        let sign = if a.primary { '+' } else { '-' };
        let _ = writeln!(out, "    {sign} {} = {}", a.key, expr(&a.value));
    }
}

/// Renders a plan in canonical layout: two-space indentation, node
/// declarations before relationship declarations, one blank line between
/// blocks. Parsing the output yields an equal plan.
pub fn print_plan(plan: &ConversionPlan) -> String {
    let mut out = String::new();
    for (i, block) in plan.entities.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "ENTITY({}):", quote(&block.name));
        for node in &block.nodes {
            let decl = wrap(&node.subgraph_wrappers, format!("NODE({})", list(&node.labels)));
            match &node.identifier {
                Some(id) => {
                    let _ = writeln!(out, "  {decl} {id}:");
                }
                None => {
                    let _ = writeln!(out, "  {decl}:");
                }
            }
            attributes(&mut out, &node.attributes);
        }
        for rel in &block.relationships {
            let decl = format!(
                "RELATIONSHIP({}, {}, {})",
                node_ref(&rel.source),
                expr(&rel.rel_type),
                node_ref(&rel.target)
            );
            let _ = writeln!(out, "  {}:", wrap(&rel.subgraph_wrappers, decl));
            attributes(&mut out, &rel.attributes);
        }
    }
    out
}
