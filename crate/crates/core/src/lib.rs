//! Relational-to-property-graph conversion.
//!
//! Resources (rows) come from a [`resource::ResourceIterator`]; a schema in
//! the conversion language ([`schema`]) says which nodes and relationships
//! each resource type produces; the [`convert`] module runs the conversion
//! into a [`graph::PropertyGraph`] and streams every commit to a
//! [`sink`].

pub mod bench;
pub mod convert;
pub mod graph;
pub mod presets;
pub mod resource;
pub mod schema;
pub mod sink;
pub mod subgraph;
pub mod value;
pub mod wrapper;

pub use convert::{run, run_into, ConvertError, OnError, RunConfig, RunOutput, RunReport};
pub use graph::{canonical_form, NodeId, PropertyGraph, RelId};
pub use resource::{Resource, ResourceIterator, SourceError};
pub use sink::{CommitSink, CypherSink, HttpConfig, HttpSink, JsonSink, NullSink};
pub use schema::{link_plan, parse_schema, ConversionPlan, LinkedPlan, SyntaxError};
pub use value::Value;
pub use wrapper::{Attribute, WrapperKind, WrapperRegistry};
