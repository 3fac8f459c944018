//! Plain `key=value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("unknown key `{key}` (line {line})")]
    Unknown { line: usize, key: String },
    #[error("{0}")]
    Invalid(String),
}

/// Parsed entries. Keys are consumed by the typed getters; [`KvConfig::finish`]
/// rejects whatever is left.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvConfig {
    /// `#` starts a comment; blank lines are ignored; keys may not repeat.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected key=value, got `{body}`") })?;
            let k = k.trim();
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-') {
                return Err(ConfigError::Syntax { line, msg: format!("invalid key `{k}`") });
            }
            if entries.insert(k.to_string(), (v.trim().to_string(), line)).is_some() {
                return Err(ConfigError::Syntax { line, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::Value { line, key: key.into(), msg: e.to_string() }),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Comma-separated list; empty items are skipped.
    pub fn take_list<T, F>(&mut self, key: &str, parse: F) -> Result<Option<Vec<T>>, ConfigError>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse(s).map_err(|msg| ConfigError::Value { line, key: key.into(), msg }))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Fails on the first key no getter consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((key, (_, line))) => Err(ConfigError::Unknown { line, key }),
        }
    }
}
