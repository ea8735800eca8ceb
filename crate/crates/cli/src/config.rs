//! Key=value run configuration with layered precedence.
//!
//! Every tunable resolves flag → config file → built-in default, and each
//! resolution is echoed to stderr with its source, so a run's effective
//! settings are always in its log. File keys nobody asked for are
//! rejected — a misspelled key must not silently fall back to a default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use graspgrad::error::{Error, Result};

pub struct Resolver {
    file: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
    origin: String,
}

impl Resolver {
    /// Load `path` if given; `None` resolves everything from flags and
    /// defaults. Lines are `key = value`; `#` starts a comment.
    pub fn new(path: Option<&Path>) -> Result<Resolver> {
        let mut file = BTreeMap::new();
        let mut origin = String::from("none");
        if let Some(path) = path {
            origin = path.display().to_string();
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("config file {origin}: {e}")))?;
            for (number, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "config file {origin} line {}: expected `key = value`, got `{raw}`",
                        number + 1
                    ))
                })?;
                let key = key.trim().to_string();
                if file.insert(key.clone(), value.trim().to_string()).is_some() {
                    return Err(Error::Config(format!(
                        "config file {origin} line {}: duplicate key `{key}`",
                        number + 1
                    )));
                }
            }
        }
        Ok(Resolver { file, consumed: BTreeSet::new(), origin })
    }

    /// Resolve one key. The flag wins, then the file, then the default;
    /// the choice is echoed to stderr.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        self.consumed.insert(key.to_string());
        let (value, source) = if let Some(v) = flag {
            (v, "flag")
        } else if let Some(text) = self.file.get(key) {
            let v = text.parse().map_err(|_| {
                Error::Config(format!(
                    "config file {} key `{key}`: cannot parse `{text}`",
                    self.origin
                ))
            })?;
            (v, "file")
        } else {
            (default, "default")
        };
        eprintln!("config: {key} = {value} ({source})");
        Ok(value)
    }

    /// Reject file keys that no resolution step asked for.
    pub fn finish(&self) -> Result<()> {
        for key in self.file.keys() {
            if !self.consumed.contains(key) {
                return Err(Error::Config(format!(
                    "config file {}: unknown key `{key}`",
                    self.origin
                )));
            }
        }
        Ok(())
    }
}
