//! Run configurations: built-in defaults, overlaid by a JSON file, overlaid
//! by command-line flags.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde_json::Value;

/// Loads a run configuration from `path`, or the defaults when absent.
///
/// A manifest written by a previous run is accepted too; its `config`
/// member is used, so the run can be repeated exactly.
pub fn load<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    command: &str,
) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(recorded) = value.get("command").and_then(Value::as_str) {
        if recorded != command {
            anyhow::bail!(
                "{} is a manifest of `{recorded}`, not `{command}`",
                path.display()
            );
        }
        value = value
            .get_mut("config")
            .map(Value::take)
            .with_context(|| format!("manifest {} has no config", path.display()))?;
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

/// Replaces `slot` with `flag` when the flag was given.
pub fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
