use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{
    AttributeSpec, ConversionPlan, NodeRef, NodeTemplate, RelationshipTemplate, Span, ValueExpr,
    WrapperName,
};
use crate::value::Value;
use crate::wrapper::{AttributeFn, ResourceFn, SubgraphFn, Transform, WrapperKind, WrapperRegistry};

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("unknown wrapper `{name}` at {span}")]
    UnknownWrapper { name: String, span: Span },
    #[error("wrapper `{name}` is a {actual} but is used as {expected} at {span}")]
    KindMismatch {
        name: String,
        expected: &'static str,
        actual: WrapperKind,
        span: Span,
    },
}

impl LinkError {
    pub fn span(&self) -> Span {
        match self {
            LinkError::UnknownWrapper { span, .. } | LinkError::KindMismatch { span, .. } => *span,
        }
    }

    pub fn message(&self) -> String {
        match self {
            LinkError::UnknownWrapper { name, .. } => format!("unknown wrapper `{name}`"),
            LinkError::KindMismatch {
                name, expected, actual, ..
            } => format!("wrapper `{name}` is a {actual} but is used as {expected}"),
        }
    }

    /// `error: <message> at <file>:<line>:<col>`
    pub fn render(&self, file: &str) -> String {
        format!("error: {} at {file}:{}", self.message(), self.span())
    }
}

/// A value expression with wrappers bound. Attribute prefixes are dropped:
/// both the entity name and node identifiers read from the resource.
#[derive(Clone)]
pub enum Expr {
    Literal(Value),
    Attr(Arc<str>),
    /// Attribute preprocessor: rewrites the resource, then `arg` is evaluated
    /// against the result.
    Pre {
        name: Arc<str>,
        f: Arc<ResourceFn>,
        arg: Box<Expr>,
    },
    /// Attribute postprocessor applied to the evaluated `arg`.
    Post {
        name: Arc<str>,
        f: Arc<AttributeFn>,
        arg: Box<Expr>,
    },
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => write!(f, "{v:?}"),
            Expr::Attr(a) => write!(f, ".{a}"),
            Expr::Pre { name, arg, .. } | Expr::Post { name, arg, .. } => write!(f, "{name}({arg:?})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkedAttribute {
    pub key: String,
    pub value: Expr,
    pub primary: bool,
}

/// A subgraph wrapper bound to its transform.
#[derive(Clone)]
pub enum SubgraphStep {
    Pre { name: Arc<str>, f: Arc<ResourceFn> },
    Post { name: Arc<str>, f: Arc<SubgraphFn> },
}

impl SubgraphStep {
    pub fn name(&self) -> &str {
        match self {
            SubgraphStep::Pre { name, .. } | SubgraphStep::Post { name, .. } => name,
        }
    }
}

impl fmt::Debug for SubgraphStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgraphStep::Pre { name, .. } => write!(f, "Pre({name})"),
            SubgraphStep::Post { name, .. } => write!(f, "Post({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkedNode {
    pub labels: Vec<Expr>,
    pub identifier: Option<String>,
    pub attributes: Vec<LinkedAttribute>,
    /// Innermost first, i.e. in application order.
    pub wrappers: Vec<SubgraphStep>,
    pub template_index: usize,
    /// True when some relationship of the block refers to this node by
    /// identifier, so its committed id must be remembered.
    pub referenced: bool,
}

impl LinkedNode {
    pub fn primary_key(&self) -> Option<&str> {
        self.attributes.iter().find(|a| a.primary).map(|a| a.key.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum LinkedRef {
    /// A node template of the same block, by template index.
    Template(usize),
    Match {
        labels: Vec<Expr>,
        conditions: Vec<(String, Expr)>,
    },
}

#[derive(Debug, Clone)]
pub struct LinkedRelationship {
    pub source: LinkedRef,
    pub rel_type: Expr,
    pub target: LinkedRef,
    pub attributes: Vec<LinkedAttribute>,
    pub wrappers: Vec<SubgraphStep>,
    pub template_index: usize,
}

impl LinkedRelationship {
    pub fn primary_key(&self) -> Option<&str> {
        self.attributes.iter().find(|a| a.primary).map(|a| a.key.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct LinkedEntity {
    pub name: String,
    pub nodes: Vec<LinkedNode>,
    pub relationships: Vec<LinkedRelationship>,
}

/// An executable plan. Immutable and shareable across threads.
#[derive(Debug, Clone, Default)]
pub struct LinkedPlan {
    pub entities: BTreeMap<String, LinkedEntity>,
}

impl LinkedPlan {
    pub fn entity(&self, type_name: &str) -> Option<&LinkedEntity> {
        self.entities.get(type_name)
    }

    /// Total node and relationship templates.
    pub fn template_totals(&self) -> (usize, usize) {
        self.entities
            .values()
            .fold((0, 0), |(n, r), e| (n + e.nodes.len(), r + e.relationships.len()))
    }
}

struct Linker<'r> {
    registry: &'r WrapperRegistry,
}

impl Linker<'_> {
    fn lookup(&self, name: &str, span: Span) -> Result<&Transform, LinkError> {
        self.registry.lookup(name).ok_or_else(|| LinkError::UnknownWrapper {
            name: name.to_string(),
            span,
        })
    }

    fn expr(&self, e: &ValueExpr) -> Result<Expr, LinkError> {
        Ok(match e {
            ValueExpr::Literal(v) => Expr::Literal(v.clone()),
            ValueExpr::AttrRef { attr, .. } => Expr::Attr(Arc::from(attr.as_str())),
            ValueExpr::WrapperCall { wrapper, arg, span } => {
                let arg = Box::new(self.expr(arg)?);
                let name = Arc::from(wrapper.as_str());
                match self.lookup(wrapper, *span)? {
                    Transform::AttrPre(f) => Expr::Pre { name, f: f.clone(), arg },
                    Transform::AttrPost(f) => Expr::Post { name, f: f.clone(), arg },
                    other => {
                        return Err(LinkError::KindMismatch {
                            name: wrapper.clone(),
                            expected: "an attribute pre- or postprocessor inside a value expression",
                            actual: other.kind(),
                            span: *span,
                        })
                    }
                }
            }
        })
    }

    fn attributes(&self, attrs: &[AttributeSpec]) -> Result<Vec<LinkedAttribute>, LinkError> {
        attrs
            .iter()
            .map(|a| {
                Ok(LinkedAttribute {
                    key: a.key.clone(),
                    value: self.expr(&a.value)?,
                    primary: a.primary,
                })
            })
            .collect()
    }

    fn wrappers(&self, names: &[WrapperName]) -> Result<Vec<SubgraphStep>, LinkError> {
        names
            .iter()
            .rev()
            .map(|w| {
                let name = Arc::from(w.name.as_str());
                match self.lookup(&w.name, w.span)? {
                    Transform::SubgraphPre(f) => Ok(SubgraphStep::Pre { name, f: f.clone() }),
                    Transform::SubgraphPost(f) => Ok(SubgraphStep::Post { name, f: f.clone() }),
                    other => Err(LinkError::KindMismatch {
                        name: w.name.clone(),
                        expected: "a subgraph pre- or postprocessor around NODE or RELATIONSHIP",
                        actual: other.kind(),
                        span: w.span,
                    }),
                }
            })
            .collect()
    }

    fn node(&self, n: &NodeTemplate, referenced: bool) -> Result<LinkedNode, LinkError> {
        Ok(LinkedNode {
            labels: n.labels.iter().map(|l| self.expr(l)).collect::<Result<_, _>>()?,
            identifier: n.identifier.clone(),
            attributes: self.attributes(&n.attributes)?,
            wrappers: self.wrappers(&n.subgraph_wrappers)?,
            template_index: n.template_index,
            referenced,
        })
    }

    fn node_ref(&self, r: &NodeRef, nodes: &[NodeTemplate]) -> Result<LinkedRef, LinkError> {
        Ok(match r {
            NodeRef::Identifier { name, .. } => LinkedRef::Template(
                nodes
                    .iter()
                    .position(|n| n.identifier.as_deref() == Some(name))
                    .expect("identifiers are resolved by the parser"),
            ),
            NodeRef::Match(m) => LinkedRef::Match {
                labels: m.labels.iter().map(|l| self.expr(l)).collect::<Result<_, _>>()?,
                conditions: m
                    .conditions
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), self.expr(v)?)))
                    .collect::<Result<_, LinkError>>()?,
            },
        })
    }

    fn relationship(&self, r: &RelationshipTemplate, nodes: &[NodeTemplate]) -> Result<LinkedRelationship, LinkError> {
        Ok(LinkedRelationship {
            source: self.node_ref(&r.source, nodes)?,
            rel_type: self.expr(&r.rel_type)?,
            target: self.node_ref(&r.target, nodes)?,
            attributes: self.attributes(&r.attributes)?,
            wrappers: self.wrappers(&r.subgraph_wrappers)?,
            template_index: r.template_index,
        })
    }
}

/// Binds every wrapper name in `plan` to its transform in `registry` and
/// checks that its kind fits where it is used.
pub fn link_plan(plan: &ConversionPlan, registry: &WrapperRegistry) -> Result<LinkedPlan, LinkError> {
    let linker = Linker { registry };
    let mut entities = BTreeMap::new();
    for block in &plan.entities {
        let is_referenced = |identifier: Option<&str>| {
            identifier.is_some_and(|id| {
                block.relationships.iter().any(|r| {
                    [&r.source, &r.target]
                        .iter()
                        .any(|e| matches!(e, NodeRef::Identifier { name, .. } if name == id))
                })
            })
        };
        let nodes = block
            .nodes
            .iter()
            .map(|n| linker.node(n, is_referenced(n.identifier.as_deref())))
            .collect::<Result<_, _>>()?;
        let relationships = block
            .relationships
            .iter()
            .map(|r| linker.relationship(r, &block.nodes))
            .collect::<Result<_, _>>()?;
        entities.insert(
            block.name.clone(),
            LinkedEntity {
                name: block.name.clone(),
                nodes,
                relationships,
            },
        );
    }
    Ok(LinkedPlan { entities })
}
