use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Option values resolved from command-line flags layered over a JSON file.
///
/// Keys are the long flag names without the leading dashes. The file may be a
/// plain object or a manifest written by an earlier run.
pub struct Layered {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Layered {
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self, CliError> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", p.display())))?;
                let value: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::config("config", format!("{} is not valid JSON: {e}", p.display())))?;
                object_from(value, command)?
            }
        };
        Ok(Self { file, resolved: Map::new() })
    }

    /// Forgets file values for `keys`; used when a flag picks a different alternative.
    pub fn drop_file_keys(&mut self, keys: &[&str]) {
        for k in keys {
            self.file.remove(*k);
        }
    }

    pub fn in_file(&self, key: &str) -> bool {
        self.file.get(key).is_some_and(|v| !v.is_null())
    }

    pub fn opt<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let from_file = self.file.remove(key);
        let value = match (flag, from_file) {
            (Some(v), _) => Some(v),
            (None, None | Some(Value::Null)) => None,
            (None, Some(raw)) => Some(
                serde_json::from_value(raw).map_err(|e| CliError::config(key, format!("bad value in config file: {e}")))?,
            ),
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, &default);
                Ok(default)
            }
        }
    }

    pub fn require<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.opt(key, flag)?.ok_or_else(|| CliError::config(key, "is required"))
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("option values serialize");
        self.resolved.insert(key.to_string(), v);
    }

    /// The resolved configuration; fails on keys in the file that no option consumed.
    pub fn finish(self) -> Result<Value, CliError> {
        if let Some(k) = self.file.keys().next() {
            return Err(CliError::config(k, "unknown key in config file"));
        }
        Ok(Value::Object(self.resolved))
    }
}

fn object_from(value: Value, command: &str) -> Result<Map<String, Value>, CliError> {
    let Value::Object(mut map) = value else {
        return Err(CliError::config("config", "expected a JSON object"));
    };
    if let (Some(Value::String(cmd)), Some(Value::Object(_))) = (map.get("command"), map.get("config")) {
        if cmd != command {
            return Err(CliError::config("config", format!("manifest is for '{cmd}', not '{command}'")));
        }
        let Some(Value::Object(inner)) = map.remove("config") else { unreachable!() };
        return Ok(inner);
    }
    Ok(map)
}

/// `lo:hi:count`, with `count >= 2` and `lo < hi`.
pub fn parse_grid(key: &str, text: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::config(key, format!("expected lo:hi:count, got '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || count < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::config(key, format!("need lo < hi and count >= 2, got '{text}'")));
    }
    Ok((lo, hi, count))
}

/// `lo:hi` with `lo < hi`.
pub fn parse_range(key: &str, text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::config(key, format!("expected lo:hi with lo < hi, got '{text}'"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}
