//! Canonical JSON: object keys sorted, no insignificant whitespace, UTF-8.
//!
//! `serde_json::Value` keeps object keys in a `BTreeMap` (the
//! `preserve_order` feature is off), so routing through a `Value` sorts them.

use serde::Serialize;

pub fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("in-memory serialization cannot fail")
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    to_value(value).to_string()
}

/// Re-emits arbitrary JSON text in canonical form.
pub fn normalize(text: &str) -> Result<String, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    Ok(value.to_string())
}
