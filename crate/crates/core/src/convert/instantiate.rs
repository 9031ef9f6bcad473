//! Turning one resource and one template into pending graph elements.
//!
//! Order per element: subgraph preprocessors, label or type expressions,
//! attributes in declaration order, subgraph postprocessors.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::ElementError;
use crate::graph::NodeId;
use crate::resource::Resource;
use crate::schema::{Expr, LinkedAttribute, LinkedNode, LinkedRef, LinkedRelationship, SubgraphStep};
use crate::subgraph::{Endpoint, PendingNode, PendingRelationship, Subgraph};
use crate::value::Value;
use crate::wrapper::{Attribute, TransformError, WrapperError};

/// Elements built from one template, or nothing because a wrapper
/// suppressed the template for this resource.
#[derive(Debug, Clone, PartialEq)]
pub enum Built<T> {
    Elements(Vec<T>),
    Suppressed,
}

fn transform_error(name: &str, resource: &Resource, source: WrapperError) -> ElementError {
    ElementError::Transform(TransformError {
        wrapper: name.to_string(),
        resource: Some(resource.to_string()),
        source,
    })
}

/// Evaluates `expr` for the attribute `key`. `Ok(None)` means a wrapper
/// suppressed the value. Attribute postprocessors may rename the key.
pub fn eval(expr: &Expr, key: &str, resource: &Resource) -> Result<Option<Attribute>, ElementError> {
    match expr {
        Expr::Literal(v) => Ok(Some(Attribute::new(key, v.clone()))),
        Expr::Attr(name) => match resource.get(name) {
            Some(v) => Ok(Some(Attribute::new(key, v.clone()))),
            None => Err(ElementError::MissingAttribute(name.to_string())),
        },
        Expr::Pre { name, f, arg } => match f(resource.clone()).map_err(|e| transform_error(name, resource, e))? {
            Some(rewritten) => eval(arg, key, &rewritten),
            None => Ok(None),
        },
        Expr::Post { name, f, arg } => match eval(arg, key, resource)? {
            Some(a) => f(a).map_err(|e| transform_error(name, resource, e)),
            None => Ok(None),
        },
    }
}

/// Label and relationship-type text. Non-text scalars use their display
/// form; null and empty text are errors.
fn label_text(value: Value, what: &str) -> Result<String, ElementError> {
    match value {
        Value::Null => Err(ElementError::InvalidLabel(format!("{what} evaluated to null"))),
        Value::Text(s) if s.is_empty() => Err(ElementError::InvalidLabel(format!("{what} evaluated to an empty string"))),
        Value::Text(s) => Ok(s),
        other => Ok(other.to_string()),
    }
}

fn eval_label(expr: &Expr, resource: &Resource, what: &str) -> Result<Option<String>, ElementError> {
    match eval(expr, "", resource)? {
        Some(a) => label_text(a.value, what).map(Some),
        None => Ok(None),
    }
}

/// Evaluated attributes and the primary key, or `None` when the primary
/// attribute was suppressed (which suppresses the element).
type Attributes = (BTreeMap<String, Value>, Option<String>);

fn eval_attributes(specs: &[LinkedAttribute], resource: &Resource) -> Result<Option<Attributes>, ElementError> {
    let mut out = BTreeMap::new();
    let mut primary = None;
    for spec in specs {
        let Some(a) = eval(&spec.value, &spec.key, resource)? else {
            if spec.primary {
                return Ok(None);
            }
            continue;
        };
        if a.value.is_null() {
            if spec.primary {
                return Err(ElementError::PrimaryNull(a.key));
            }
            continue;
        }
        if spec.primary {
            primary = Some(a.key.clone());
        }
        out.insert(a.key, a.value);
    }
    Ok(Some((out, primary)))
}

fn pre_process<'r>(steps: &[SubgraphStep], resource: &'r Resource) -> Result<Option<Cow<'r, Resource>>, ElementError> {
    let mut current = Cow::Borrowed(resource);
    for step in steps {
        if let SubgraphStep::Pre { name, f } = step {
            match f(current.clone().into_owned()).map_err(|e| transform_error(name, resource, e))? {
                Some(r) => current = Cow::Owned(r),
                None => return Ok(None),
            }
        }
    }
    Ok(Some(current))
}

fn post_process(steps: &[SubgraphStep], mut subgraph: Subgraph, resource: &Resource) -> Result<Subgraph, ElementError> {
    for step in steps {
        if let SubgraphStep::Post { name, f } = step {
            subgraph = f(subgraph).map_err(|e| transform_error(name, resource, e))?;
        }
    }
    Ok(subgraph)
}

/// Builds the nodes of one node template. Subgraph postprocessors may return
/// several nodes; relationships they return are ignored.
pub fn instantiate_node(template: &LinkedNode, resource: &Resource) -> Result<Built<PendingNode>, ElementError> {
    let Some(resource) = pre_process(&template.wrappers, resource)? else {
        return Ok(Built::Suppressed);
    };
    let mut labels = Vec::with_capacity(template.labels.len());
    for expr in &template.labels {
        match eval_label(expr, &resource, "label")? {
            Some(l) => labels.push(l),
            None => return Ok(Built::Suppressed),
        }
    }
    let Some((attributes, primary)) = eval_attributes(&template.attributes, &resource)? else {
        return Ok(Built::Suppressed);
    };
    let node = PendingNode {
        labels,
        attributes,
        primary,
        template_index: template.template_index,
    };
    let subgraph = post_process(
        &template.wrappers,
        Subgraph {
            nodes: vec![node],
            relationships: Vec::new(),
        },
        &resource,
    )?;
    if subgraph.nodes.is_empty() {
        return Ok(Built::Suppressed);
    }
    Ok(Built::Elements(subgraph.nodes))
}

fn endpoint(
    r: &LinkedRef,
    resource: &Resource,
    template_node: &dyn Fn(usize) -> Option<NodeId>,
) -> Result<Option<Endpoint>, ElementError> {
    match r {
        LinkedRef::Template(i) => Ok(Some(Endpoint::Nodes(template_node(*i).into_iter().collect()))),
        LinkedRef::Match { labels, conditions } => {
            let mut ls = Vec::with_capacity(labels.len());
            for l in labels {
                match eval_label(l, resource, "MATCH label")? {
                    Some(l) => ls.push(l),
                    None => return Ok(None),
                }
            }
            let mut cs = Vec::with_capacity(conditions.len());
            for (k, e) in conditions {
                match eval(e, k, resource)? {
                    Some(a) => cs.push((a.key, a.value)),
                    None => return Ok(None),
                }
            }
            Ok(Some(Endpoint::Match {
                labels: ls,
                conditions: cs,
            }))
        }
    }
}

/// Builds the relationships of one relationship template. Identifier
/// endpoints are looked up with `template_node` (the node that template
/// produced for this resource, if any); MATCH endpoints are left for the
/// caller to evaluate against the graph.
pub fn instantiate_relationship(
    template: &LinkedRelationship,
    resource: &Resource,
    template_node: &dyn Fn(usize) -> Option<NodeId>,
) -> Result<Built<PendingRelationship>, ElementError> {
    let Some(resource) = pre_process(&template.wrappers, resource)? else {
        return Ok(Built::Suppressed);
    };
    let Some(source) = endpoint(&template.source, &resource, template_node)? else {
        return Ok(Built::Suppressed);
    };
    let Some(rel_type) = eval_label(&template.rel_type, &resource, "relationship type")? else {
        return Ok(Built::Suppressed);
    };
    let Some(target) = endpoint(&template.target, &resource, template_node)? else {
        return Ok(Built::Suppressed);
    };
    let Some((attributes, primary)) = eval_attributes(&template.attributes, &resource)? else {
        return Ok(Built::Suppressed);
    };
    let rel = PendingRelationship {
        source,
        rel_type,
        target,
        attributes,
        primary,
        template_index: template.template_index,
    };
    let subgraph = post_process(
        &template.wrappers,
        Subgraph {
            nodes: Vec::new(),
            relationships: vec![rel],
        },
        &resource,
    )?;
    if subgraph.relationships.is_empty() {
        return Ok(Built::Suppressed);
    }
    Ok(Built::Elements(subgraph.relationships))
}
