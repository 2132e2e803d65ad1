//! Flat `key = value` configuration files.
//!
//! One file carries both the model and the training settings. Blank lines
//! and `#` comments are ignored; unknown keys, duplicate keys and values
//! that do not parse are hard errors.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// A settings block addressable by string keys.
pub trait KeyValue {
    /// Applies one setting. `Ok(false)` means the key is not part of this block.
    fn set(&mut self, key: &str, value: &str) -> Result<bool>;
    /// Every key with its current value, in a stable order.
    fn entries(&self) -> Vec<(&'static str, String)>;
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("`{key}`: expected a boolean, got `{other}`"))),
    }
}

/// Prefixes a line number, without repeating the `config:` prefix.
pub(crate) fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("line {line}: {msg}")),
        other => Error::Config(format!("line {line}: {other}")),
    }
}

/// Splits `key = value` lines. Returns `(line number, key, value)`.
pub fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? || self.train.set(key, value)? {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown key `{key}`")))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_onto(RunConfig::default(), text)
    }

    /// Applies the lines of `text` on top of `base`.
    pub fn parse_onto(base: RunConfig, text: &str) -> Result<Self> {
        let mut cfg = base;
        let mut seen = BTreeSet::new();
        for (line, k, v) in parse_lines(text)? {
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!("line {line}: duplicate key `{k}`")));
            }
            cfg.set(&k, &v)
                .map_err(|e| at_line(line, e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Toy model dimensions with default training settings.
    pub fn toy() -> Self {
        RunConfig {
            model: ModelConfig::toy(),
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn is_known_key(key: &str) -> bool {
        let cfg = RunConfig::default();
        cfg.model.entries().iter().chain(cfg.train.entries().iter()).any(|(k, _)| *k == key)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.model.entries().into_iter().chain(self.train.entries()) {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}
