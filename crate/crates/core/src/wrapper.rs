//! User transforms ("wrappers") and their registry.
//!
//! There are four kinds. Attribute preprocessors and subgraph preprocessors
//! both receive the input [`Resource`]; attribute postprocessors receive one
//! evaluated [`Attribute`]; subgraph postprocessors receive the finished
//! [`Subgraph`] of a template. Returning `Ok(None)` from a pre- or attribute
//! postprocessor suppresses the wrapped element: this is how conditionals are
//! written.
//!
//! Transforms may run on several worker threads at once. Any state a transform
//! keeps sees resources in a nondeterministic order unless the converter runs
//! with a single worker.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::resource::Resource;
use crate::subgraph::Subgraph;
use crate::value::Value;

pub type WrapperError = Box<dyn std::error::Error + Send + Sync>;

pub type ResourceFn = dyn Fn(Resource) -> Result<Option<Resource>, WrapperError> + Send + Sync;
pub type AttributeFn = dyn Fn(Attribute) -> Result<Option<Attribute>, WrapperError> + Send + Sync;
pub type SubgraphFn = dyn Fn(Subgraph) -> Result<Subgraph, WrapperError> + Send + Sync;

/// A key/value pair. Labels and relationship types travel through attribute
/// wrappers with an empty key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub key: String,
    pub value: Value,
}

impl Attribute {
    pub fn new(key: impl Into<String>, value: impl Into<Value>) -> Self {
        Attribute {
            key: key.into(),
            value: value.into(),
        }
    }

    /// True for the label/type slot.
    pub fn is_label(&self) -> bool {
        self.key.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WrapperKind {
    AttrPre,
    AttrPost,
    SubgraphPre,
    SubgraphPost,
}

impl WrapperKind {
    pub fn is_attribute(self) -> bool {
        matches!(self, WrapperKind::AttrPre | WrapperKind::AttrPost)
    }

    pub fn is_subgraph(self) -> bool {
        !self.is_attribute()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WrapperKind::AttrPre => "attribute preprocessor",
            WrapperKind::AttrPost => "attribute postprocessor",
            WrapperKind::SubgraphPre => "subgraph preprocessor",
            WrapperKind::SubgraphPost => "subgraph postprocessor",
        }
    }
}

impl fmt::Display for WrapperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for WrapperKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attr-pre" => Ok(WrapperKind::AttrPre),
            "attr-post" => Ok(WrapperKind::AttrPost),
            "subgraph-pre" => Ok(WrapperKind::SubgraphPre),
            "subgraph-post" => Ok(WrapperKind::SubgraphPost),
            other => Err(format!(
                "unknown wrapper kind `{other}` (expected attr-pre, attr-post, subgraph-pre or subgraph-post)"
            )),
        }
    }
}

#[derive(Clone)]
pub enum Transform {
    AttrPre(Arc<ResourceFn>),
    AttrPost(Arc<AttributeFn>),
    SubgraphPre(Arc<ResourceFn>),
    SubgraphPost(Arc<SubgraphFn>),
}

impl Transform {
    pub fn kind(&self) -> WrapperKind {
        match self {
            Transform::AttrPre(_) => WrapperKind::AttrPre,
            Transform::AttrPost(_) => WrapperKind::AttrPost,
            Transform::SubgraphPre(_) => WrapperKind::SubgraphPre,
            Transform::SubgraphPost(_) => WrapperKind::SubgraphPost,
        }
    }

    /// A transform of the given kind that passes its input through unchanged.
    pub fn identity(kind: WrapperKind) -> Self {
        match kind {
            WrapperKind::AttrPre => Transform::AttrPre(Arc::new(|r| Ok(Some(r)))),
            WrapperKind::AttrPost => Transform::AttrPost(Arc::new(|a| Ok(Some(a)))),
            WrapperKind::SubgraphPre => Transform::SubgraphPre(Arc::new(|r| Ok(Some(r)))),
            WrapperKind::SubgraphPost => Transform::SubgraphPost(Arc::new(Ok)),
        }
    }
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Transform({})", self.kind())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("wrapper `{0}` is already registered")]
    DuplicateName(String),
    #[error("unknown wrapper `{0}`")]
    UnknownWrapper(String),
    #[error("wrapper `{name}` is a {actual}, expected a {expected}")]
    KindMismatch {
        name: String,
        expected: &'static str,
        actual: WrapperKind,
    },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// A failure raised inside a user transform.
#[derive(Debug, thiserror::Error)]
#[error("wrapper `{wrapper}` failed{}: {source}", .resource.as_ref().map(|r| format!(" on {r}")).unwrap_or_default())]
pub struct TransformError {
    pub wrapper: String,
    /// `Type#ordinal` of the resource being converted, when known.
    pub resource: Option<String>,
    #[source]
    pub source: WrapperError,
}

/// Named transforms in a single namespace shared by all four kinds.
#[derive(Clone, Default, Debug)]
pub struct WrapperRegistry {
    entries: BTreeMap<String, Transform>,
}

impl WrapperRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding the built-in `INT`, `FLOAT`, `UPPER` and `LOWER`
    /// attribute postprocessors.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        builtins::register_all(&mut r).expect("built-in names are unique");
        r
    }

    pub fn register(&mut self, name: impl Into<String>, transform: Transform) -> Result<(), RegistryError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(RegistryError::DuplicateName(name));
        }
        self.entries.insert(name, transform);
        Ok(())
    }

    pub fn register_attribute_preprocessor<F>(&mut self, name: &str, f: F) -> Result<(), RegistryError>
    where
        F: Fn(Resource) -> Result<Option<Resource>, WrapperError> + Send + Sync + 'static,
    {
        self.register(name, Transform::AttrPre(Arc::new(f)))
    }

    pub fn register_attribute_postprocessor<F>(&mut self, name: &str, f: F) -> Result<(), RegistryError>
    where
        F: Fn(Attribute) -> Result<Option<Attribute>, WrapperError> + Send + Sync + 'static,
    {
        self.register(name, Transform::AttrPost(Arc::new(f)))
    }

    pub fn register_subgraph_preprocessor<F>(&mut self, name: &str, f: F) -> Result<(), RegistryError>
    where
        F: Fn(Resource) -> Result<Option<Resource>, WrapperError> + Send + Sync + 'static,
    {
        self.register(name, Transform::SubgraphPre(Arc::new(f)))
    }

    pub fn register_subgraph_postprocessor<F>(&mut self, name: &str, f: F) -> Result<(), RegistryError>
    where
        F: Fn(Subgraph) -> Result<Subgraph, WrapperError> + Send + Sync + 'static,
    {
        self.register(name, Transform::SubgraphPost(Arc::new(f)))
    }

    pub fn lookup(&self, name: &str) -> Option<&Transform> {
        self.entries.get(name)
    }

    pub fn kind(&self, name: &str) -> Option<WrapperKind> {
        self.lookup(name).map(Transform::kind)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Runs an attribute postprocessor. `Ok(None)` means suppressed.
    pub fn apply_attribute(&self, name: &str, attribute: Attribute) -> Result<Option<Attribute>, RegistryError> {
        match self.lookup(name) {
            Some(Transform::AttrPost(f)) => f(attribute).map_err(|source| {
                TransformError {
                    wrapper: name.to_string(),
                    resource: None,
                    source,
                }
                .into()
            }),
            Some(other) => Err(RegistryError::KindMismatch {
                name: name.to_string(),
                expected: WrapperKind::AttrPost.as_str(),
                actual: other.kind(),
            }),
            None => Err(RegistryError::UnknownWrapper(name.to_string())),
        }
    }

    /// Runs a subgraph preprocessor. `Ok(None)` means the wrapped template is
    /// skipped for this resource.
    pub fn apply_subgraph_pre(&self, name: &str, resource: Resource) -> Result<Option<Resource>, RegistryError> {
        match self.lookup(name) {
            Some(Transform::SubgraphPre(f)) => {
                let label = resource.to_string();
                f(resource).map_err(|source| {
                    TransformError {
                        wrapper: name.to_string(),
                        resource: Some(label),
                        source,
                    }
                    .into()
                })
            }
            Some(other) => Err(RegistryError::KindMismatch {
                name: name.to_string(),
                expected: WrapperKind::SubgraphPre.as_str(),
                actual: other.kind(),
            }),
            None => Err(RegistryError::UnknownWrapper(name.to_string())),
        }
    }
}

/// Library-provided attribute postprocessors for untyped sources.
pub mod builtins {
    use super::*;

    fn err(msg: String) -> WrapperError {
        msg.into()
    }

    /// Text → Int (surrounding whitespace ignored); Int unchanged; integral
    /// Float → Int; Bool → 0/1; Null passes through.
    pub fn int(a: Attribute) -> Result<Option<Attribute>, WrapperError> {
        let value = match &a.value {
            Value::Null => Value::Null,
            Value::Int(i) => Value::Int(*i),
            Value::Bool(b) => Value::Int(i64::from(*b)),
            Value::Float(f) if f.fract() == 0.0 && f.abs() < 9.2e18 => Value::Int(*f as i64),
            Value::Float(f) => return Err(err(format!("INT: {f} is not integral"))),
            Value::Text(s) => Value::Int(
                s.trim()
                    .parse()
                    .map_err(|_| err(format!("INT: cannot parse {s:?}")))?,
            ),
        };
        Ok(Some(Attribute { key: a.key, value }))
    }

    /// Text → Float; Int → Float; Null passes through.
    pub fn float(a: Attribute) -> Result<Option<Attribute>, WrapperError> {
        let value = match &a.value {
            Value::Null => Value::Null,
            Value::Int(i) => Value::Float(*i as f64),
            Value::Float(f) => Value::Float(*f),
            Value::Bool(_) => return Err(err("FLOAT: cannot convert a bool".into())),
            Value::Text(s) => Value::Float(
                s.trim()
                    .parse()
                    .map_err(|_| err(format!("FLOAT: cannot parse {s:?}")))?,
            ),
        };
        Ok(Some(Attribute { key: a.key, value }))
    }

    fn map_text(name: &str, a: Attribute, f: impl Fn(&str) -> String) -> Result<Option<Attribute>, WrapperError> {
        let value = match &a.value {
            Value::Null => Value::Null,
            Value::Text(s) => Value::Text(f(s)),
            other => return Err(err(format!("{name}: expected text, got {}", other.type_name()))),
        };
        Ok(Some(Attribute { key: a.key, value }))
    }

    pub fn upper(a: Attribute) -> Result<Option<Attribute>, WrapperError> {
        map_text("UPPER", a, str::to_uppercase)
    }

    pub fn lower(a: Attribute) -> Result<Option<Attribute>, WrapperError> {
        map_text("LOWER", a, str::to_lowercase)
    }

    pub const NAMES: [&str; 4] = ["INT", "FLOAT", "UPPER", "LOWER"];

    pub fn register_all(r: &mut WrapperRegistry) -> Result<(), RegistryError> {
        r.register_attribute_postprocessor("INT", int)?;
        r.register_attribute_postprocessor("FLOAT", float)?;
        r.register_attribute_postprocessor("UPPER", upper)?;
        r.register_attribute_postprocessor("LOWER", lower)?;
        Ok(())
    }
}
