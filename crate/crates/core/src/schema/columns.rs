//! Checks attribute references against the columns a source provides.

use super::{ConversionPlan, NodeRef, Span, ValueExpr, WrapperName};
use crate::resource::SourceColumns;
use crate::wrapper::{WrapperKind, WrapperRegistry};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnIssue {
    /// An attribute reference names a column the source does not have.
    Missing {
        entity: String,
        column: String,
        span: Span,
    },
    /// No source provides resources of this type; the block never fires.
    NoSource { entity: String, span: Span },
}

impl ColumnIssue {
    pub fn is_error(&self) -> bool {
        matches!(self, ColumnIssue::Missing { .. })
    }

    pub fn render(&self, file: &str) -> String {
        match self {
            ColumnIssue::Missing { entity, column, span } => format!(
                "error: `{entity}` has no column `{column}` at {file}:{}:{}",
                span.line, span.col
            ),
            ColumnIssue::NoSource { entity, span } => format!(
                "warning: no source provides `{entity}` resources at {file}:{}:{}",
                span.line, span.col
            ),
        }
    }
}

/// Reports references to columns absent from `columns`.
///
/// A preprocessor may add attributes to the resource before the reference is
/// read, so references under a subgraph preprocessor or inside an attribute
/// preprocessor call are not checked.
pub fn missing_columns(plan: &ConversionPlan, registry: &WrapperRegistry, columns: &SourceColumns) -> Vec<ColumnIssue> {
    let is_pre = |name: &str| matches!(registry.kind(name), Some(WrapperKind::AttrPre | WrapperKind::SubgraphPre));
    let mut issues = Vec::new();
    for entity in &plan.entities {
        let Some(available) = columns.get(&entity.name) else {
            issues.push(ColumnIssue::NoSource {
                entity: entity.name.clone(),
                span: entity.span,
            });
            continue;
        };
        let mut check = |wrappers: &[WrapperName], exprs: Vec<&ValueExpr>| {
            if wrappers.iter().any(|w| is_pre(&w.name)) {
                return;
            }
            for e in exprs {
                for site in e.attr_refs() {
                    if site.wrappers.iter().any(|w| is_pre(w)) || available.contains(site.attr) {
                        continue;
                    }
                    issues.push(ColumnIssue::Missing {
                        entity: entity.name.clone(),
                        column: site.attr.to_string(),
                        span: site.span,
                    });
                }
            }
        };
        for n in &entity.nodes {
            let exprs = n.labels.iter().chain(n.attributes.iter().map(|a| &a.value)).collect();
            check(&n.subgraph_wrappers, exprs);
        }
        for r in &entity.relationships {
            let mut exprs: Vec<&ValueExpr> = vec![&r.rel_type];
            for side in [&r.source, &r.target] {
                if let NodeRef::Match(m) = side {
                    exprs.extend(m.labels.iter());
                    exprs.extend(m.conditions.iter().map(|(_, v)| v));
                }
            }
            exprs.extend(r.attributes.iter().map(|a| &a.value));
            check(&r.subgraph_wrappers, exprs);
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::schema::parse_schema;

    fn cols(spec: &[(&str, &[&str])]) -> SourceColumns {
        spec.iter()
            .map(|(t, cs)| (t.to_string(), cs.iter().map(|c| c.to_string()).collect()))
            .collect()
    }

    #[test]
    fn preprocessed_references_are_exempt() {
        let text = "ENTITY(\"Product\"):\n  ParseParentCategory(NODE(\"Category\", Product.ParentCategory)):\n    + name = Product.CategoryCode\n  NODE(\"Product\"):\n    - name = Product.Nme\n";
        let plan = parse_schema(text).unwrap();
        let mut reg = WrapperRegistry::with_builtins();
        presets::register("retail", &mut reg).unwrap();
        let issues = missing_columns(&plan, &reg, &cols(&[("Product", &["Name", "CategoryCode"])]));
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].render("s.d2n"), "error: `Product` has no column `Nme` at s.d2n:5:14");
    }

    #[test]
    fn match_conditions_and_missing_types() {
        let text = "ENTITY(\"A\"):\n  RELATIONSHIP(MATCH(\"X\", id=A.x), \"R\", MATCH(\"Y\", id=A.y)):\nENTITY(\"B\"):\n  NODE(\"B\"):\n";
        let plan = parse_schema(text).unwrap();
        let issues = missing_columns(&plan, &WrapperRegistry::with_builtins(), &cols(&[("A", &["x"])]));
        assert_eq!(issues.len(), 2);
        assert!(matches!(&issues[0], ColumnIssue::Missing { column, .. } if column == "y"));
        assert!(!issues[1].is_error());
    }
}
