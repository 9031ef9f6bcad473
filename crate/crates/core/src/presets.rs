//! Named wrapper bundles that ship with the library.
//!
//! Host programs register their own transforms in code; the CLI cannot load
//! arbitrary code, so it registers every bundle listed here.

use crate::value::Value;
use crate::wrapper::{Attribute, RegistryError, WrapperError, WrapperRegistry};

pub const BUNDLES: [&str; 2] = ["retail", "bench"];

/// Category codes of the retail sample. Two-digit-and-up codes are
/// subcategories; their first digit is the parent category.
pub const CATEGORY_NAMES: [(i64, &str); 6] = [
    (1, "Clothing"),
    (2, "Home appliances"),
    (101, "T-Shirts"),
    (102, "Pants"),
    (201, "Refrigerators"),
    (202, "Washing machines"),
];

fn code_of(value: &Value) -> Result<i64, WrapperError> {
    match value {
        Value::Int(i) => Ok(*i),
        Value::Text(s) => s
            .trim()
            .parse()
            .map_err(|_| format!("category code {s:?} is not an integer").into()),
        other => Err(format!("category code must be an integer, got {}", other.type_name()).into()),
    }
}

/// Attribute postprocessor: category code → category name.
pub fn code_to_category(attribute: Attribute) -> Result<Option<Attribute>, WrapperError> {
    let code = code_of(&attribute.value)?;
    let name = CATEGORY_NAMES
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, n)| *n)
        .ok_or_else(|| format!("unknown category code {code}"))?;
    Ok(Some(Attribute::new(attribute.key, name)))
}

pub fn register_retail(registry: &mut WrapperRegistry) -> Result<(), RegistryError> {
    registry.register_attribute_postprocessor("CodeToCategory", code_to_category)?;
    registry.register_subgraph_preprocessor("ParseParentCategory", |mut resource| {
        let code = resource
            .get("CategoryCode")
            .ok_or("resource has no CategoryCode")?;
        let code = code_of(code)?;
        let first = code
            .to_string()
            .chars()
            .next()
            .and_then(|c| c.to_digit(10))
            .ok_or("category code has no leading digit")?;
        resource.set("ParentCategory", i64::from(first));
        Ok(Some(resource))
    })?;
    Ok(())
}

/// `IfRenamed`: subgraph preprocessor that keeps the wrapped template only for
/// edits whose `new_filename` is present.
pub fn register_bench(registry: &mut WrapperRegistry) -> Result<(), RegistryError> {
    registry.register_subgraph_preprocessor("IfRenamed", |resource| {
        let renamed = match resource.get("new_filename") {
            None | Some(Value::Null) => false,
            Some(Value::Text(s)) => !s.is_empty(),
            Some(_) => true,
        };
        Ok(renamed.then_some(resource))
    })
}

/// Registers a bundle by name.
pub fn register(name: &str, registry: &mut WrapperRegistry) -> Result<(), RegistryError> {
    match name {
        "retail" => register_retail(registry),
        "bench" => register_bench(registry),
        other => Err(RegistryError::UnknownWrapper(format!("bundle {other}"))),
    }
}
