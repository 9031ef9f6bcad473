//! The conversion schema language.
//!
//! A schema is a sequence of `ENTITY("Type"):` blocks. Each block holds node
//! and relationship declarations, each followed by indented attribute lines:
//!
//! ```text
//! ENTITY("Supplier"):
//!   NODE("Supplier") supplier:
//!     + id = Supplier.ID          # `+` marks the primary attribute
//!     - name = UPPER(Supplier.Name)
//!   RELATIONSHIP(supplier, "LOCATED_IN", MATCH("City", name=Supplier.City)):
//! ```
//!
//! Parsing yields an unlinked [`ConversionPlan`]; [`link_plan`] binds wrapper
//! names against a [`WrapperRegistry`](crate::wrapper::WrapperRegistry).

mod columns;
mod lexer;
mod link;
mod parser;
mod printer;

use std::fmt;

use crate::value::Value;

pub use self::columns::{missing_columns, ColumnIssue};
pub use self::link::{
    link_plan, Expr, LinkError, LinkedAttribute, LinkedEntity, LinkedNode, LinkedPlan,
    LinkedRef, LinkedRelationship, SubgraphStep,
};
pub use self::parser::{parse_schema, parse_value_expr};
pub use self::printer::print_plan;

/// Reserved words of the language.
pub const KEYWORDS: [&str; 4] = ["ENTITY", "NODE", "RELATIONSHIP", "MATCH"];

/// A source position (1-based line and column).
///
/// Positions are diagnostics only: every `Span` compares equal to every other,
/// so plans that differ only in layout are structurally equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at {span}")]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl SyntaxError {
    pub(crate) fn new(message: impl Into<String>, span: Span) -> Self {
        SyntaxError {
            message: message.into(),
            span,
        }
    }

    /// `error: <message> at <file>:<line>:<col>`
    pub fn render(&self, file: &str) -> String {
        format!("error: {} at {file}:{}", self.message, self.span)
    }
}

/// A non-fatal parser note, e.g. a recovered missing parenthesis.
#[derive(Debug, Clone)]
pub struct Warning {
    pub message: String,
    pub span: Span,
}

impl Warning {
    pub fn render(&self, file: &str) -> String {
        format!("warning: {} at {file}:{}", self.message, self.span)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueExpr {
    Literal(Value),
    /// `Prefix.attr`; the prefix is the entity name or a node identifier of
    /// the enclosing block, and always reads from the resource.
    AttrRef {
        prefix: String,
        attr: String,
        span: Span,
    },
    WrapperCall {
        wrapper: String,
        arg: Box<ValueExpr>,
        span: Span,
    },
}

impl ValueExpr {
    pub fn literal(v: impl Into<Value>) -> Self {
        ValueExpr::Literal(v.into())
    }

    pub fn attr(prefix: &str, attr: &str) -> Self {
        ValueExpr::AttrRef {
            prefix: prefix.into(),
            attr: attr.into(),
            span: Span::default(),
        }
    }

    pub fn call(wrapper: &str, arg: ValueExpr) -> Self {
        ValueExpr::WrapperCall {
            wrapper: wrapper.into(),
            arg: Box::new(arg),
            span: Span::default(),
        }
    }

    /// Every attribute reference with the wrapper calls enclosing it,
    /// outermost first.
    pub fn attr_refs(&self) -> Vec<AttrRefSite<'_>> {
        fn go<'a>(e: &'a ValueExpr, stack: &mut Vec<&'a str>, out: &mut Vec<AttrRefSite<'a>>) {
            match e {
                ValueExpr::Literal(_) => {}
                ValueExpr::AttrRef { prefix, attr, span } => out.push(AttrRefSite {
                    prefix,
                    attr,
                    span: *span,
                    wrappers: stack.clone(),
                }),
                ValueExpr::WrapperCall { wrapper, arg, .. } => {
                    stack.push(wrapper);
                    go(arg, stack, out);
                    stack.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub struct AttrRefSite<'a> {
    pub prefix: &'a str,
    pub attr: &'a str,
    pub span: Span,
    pub wrappers: Vec<&'a str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub key: String,
    pub value: ValueExpr,
    pub primary: bool,
    pub span: Span,
}

/// A wrapper name applied around a NODE or RELATIONSHIP declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct WrapperName {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTemplate {
    /// At least one; the first is the merge label.
    pub labels: Vec<ValueExpr>,
    pub identifier: Option<String>,
    pub attributes: Vec<AttributeSpec>,
    /// Outermost first.
    pub subgraph_wrappers: Vec<WrapperName>,
    /// Position among the block's node templates.
    pub template_index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSpec {
    pub labels: Vec<ValueExpr>,
    pub conditions: Vec<(String, ValueExpr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeRef {
    Identifier { name: String, span: Span },
    Match(MatchSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipTemplate {
    pub source: NodeRef,
    pub rel_type: ValueExpr,
    pub target: NodeRef,
    pub attributes: Vec<AttributeSpec>,
    /// Outermost first.
    pub subgraph_wrappers: Vec<WrapperName>,
    /// Position among the block's relationship templates.
    pub template_index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityBlock {
    pub name: String,
    pub nodes: Vec<NodeTemplate>,
    pub relationships: Vec<RelationshipTemplate>,
    pub span: Span,
}

impl EntityBlock {
    pub fn node_by_identifier(&self, name: &str) -> Option<&NodeTemplate> {
        self.nodes
            .iter()
            .find(|n| n.identifier.as_deref() == Some(name))
    }
}

/// A parsed, unlinked schema.
#[derive(Debug, Clone, Default)]
pub struct ConversionPlan {
    /// In declaration order; names are unique.
    pub entities: Vec<EntityBlock>,
    pub warnings: Vec<Warning>,
}

impl PartialEq for ConversionPlan {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
    }
}

impl ConversionPlan {
    pub fn entity(&self, name: &str) -> Option<&EntityBlock> {
        self.entities.iter().find(|e| e.name == name)
    }

    /// (node templates, relationship templates) per entity, in order.
    pub fn template_counts(&self) -> Vec<(&str, usize, usize)> {
        self.entities
            .iter()
            .map(|e| (e.name.as_str(), e.nodes.len(), e.relationships.len()))
            .collect()
    }
}
