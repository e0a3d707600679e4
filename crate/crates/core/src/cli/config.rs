//! Option resolution: command-line flag, then `SPATIAL_TEMPLATES_*`
//! environment variable, then config file, then built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "SPATIAL_TEMPLATES_";

/// `grid_size`, `GRID_SIZE` and `grid-size` all name the same option.
fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Parses a config file: a JSON object, or `key = value` lines with `#`
/// comments.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let obj: Map<String, Value> = serde_json::from_str(text)?;
        return Ok(obj.iter().map(|(k, v)| (normalize_key(k), scalar(v))).collect());
    }
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
        out.insert(normalize_key(k), v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

/// Resolves options layer by layer and records every resolved value.
#[derive(Debug, Default)]
pub struct Layers {
    file: BTreeMap<String, String>,
    env: BTreeMap<String, String>,
    resolved: Map<String, Value>,
}

impl Layers {
    pub fn new(file: BTreeMap<String, String>, env: BTreeMap<String, String>) -> Self {
        Self {
            file,
            env,
            resolved: Map::new(),
        }
    }

    /// Reads the optional config file and the process environment.
    pub fn load(config_path: Option<&Path>) -> Result<Self> {
        let file = match config_path {
            Some(p) => parse_config_text(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => BTreeMap::new(),
        };
        let env = std::env::vars()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (normalize_key(rest), v)))
            .collect();
        Ok(Self::new(file, env))
    }

    fn lower_layers(&self, key: &str) -> Option<(&str, &'static str)> {
        if let Some(v) = self.env.get(key) {
            return Some((v, "environment"));
        }
        self.file.get(key).map(|v| (v.as_str(), "config file"))
    }

    fn parse<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.lower_layers(key) {
            None => Ok(None),
            Some((raw, source)) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("{key} = {raw:?} from the {source}: {e}"))),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.resolved.insert(key.to_string(), v);
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.parse(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.parse(key)?,
        };
        self.record(key, &v);
        Ok(v)
    }

    /// A switch given on the command line is on; otherwise the lower layers
    /// decide, defaulting to off.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = if flag { true } else { self.parse(key)?.unwrap_or(false) };
        self.record(key, &v);
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| Error::Config(format!("--{key} is required")))
    }

    /// The resolved options of one command, as echoed into its artifacts.
    pub fn into_config(self, command: &str) -> Value {
        let mut out = Map::new();
        out.insert("command".into(), Value::String(command.to_string()));
        out.insert("options".into(), Value::Object(self.resolved));
        Value::Object(out)
    }
}

/// Comma-separated list, e.g. hidden layer widths `100,100`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T> FromStr for List<T>
where
    T: FromStr,
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<Vec<T>, String>>()
            .map(List)
    }
}
