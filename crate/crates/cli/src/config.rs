//! Optional JSON defaults. Keys are option names in snake_case; explicit
//! flags take precedence.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }

    pub fn missing(option: &str) -> Self {
        UsageError(format!("missing required option --{}", option.replace('_', "-")))
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn require<T>(value: Option<T>, option: &str) -> Result<T, UsageError> {
    value.ok_or_else(|| UsageError::missing(option))
}

pub fn load(path: Option<&Path>) -> anyhow::Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(UsageError::new(format!("config {} is not a JSON object", path.display())).into()),
        Err(e) => Err(UsageError::new(format!("config {}: {e}", path.display())).into()),
    }
}

/// Overlays the flags that were given (non-null, non-false) on the config.
pub fn merge<T: Serialize + DeserializeOwned>(flags: T, config: &Map<String, Value>) -> anyhow::Result<T> {
    let Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("option structs serialize to objects");
    };
    let mut out = config.clone();
    for (k, v) in given {
        match v {
            Value::Null | Value::Bool(false) => {}
            v => {
                out.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(out)).map_err(|e| UsageError::new(format!("config: {e}")).into())
}
