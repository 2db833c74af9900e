//! `key = value` run configuration with dotted section keys.
//!
//! Every key a command reads is recorded together with the value it
//! resolved to (defaults included), so the manifest echoes the full
//! configuration. Keys that were supplied but never read are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

use mdla_lab::Error;
use sha2::{Digest, Sha256};

#[derive(Debug, Default)]
pub struct Config {
    given: BTreeMap<String, String>,
    read: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(bad(format!("line {}: expected key = value", i + 1)));
            };
            let key = k.trim();
            if !valid_key(key) {
                return Err(bad(format!("line {}: bad key '{key}'", i + 1)));
            }
            if cfg.given.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(bad(format!("line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(cfg)
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), Error> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| bad(format!("--set expects key=value, got '{assignment}'")))?;
        let key = k.trim();
        if !valid_key(key) {
            return Err(bad(format!("bad key '{key}'")));
        }
        self.given.insert(key.to_string(), v.trim().to_string());
        Ok(())
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.read.insert(key.to_string());
        self.given.get(key).cloned()
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Value of `key`, or `default` when absent.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, Error> {
        let value = match self.raw(key) {
            Some(s) => s.parse().map_err(|_| bad(format!("{key}: cannot parse '{s}'")))?,
            None => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>, Error> {
        match self.raw(key) {
            Some(s) => {
                let v: T = s.parse().map_err(|_| bad(format!("{key}: cannot parse '{s}'")))?;
                self.record(key, &v);
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    /// Raw string for keys with their own syntax; `default` is used verbatim.
    pub fn text(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>, Error> {
        let text = self.text(key, default);
        parse_list(key, &text)
    }

    /// Fails on keys that were supplied but never read.
    pub fn finish(&self) -> Result<(), Error> {
        let unknown: Vec<&str> = self.given.keys().filter(|k| !self.read.contains(*k)).map(|k| k.as_str()).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(bad(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    /// SHA-256 of the command, seed and resolved configuration.
    pub fn hash(&self, command: &str, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(format!("command = {command}\nseed = {seed}\n"));
        for (k, v) in &self.resolved {
            h.update(format!("{k} = {v}\n"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>, Error> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(format!("{key}: cannot parse '{}'", s.trim()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_keys() {
        let mut c = Config::parse("# run\nlattice.n = 32\nhorizon = 0.5 # trailing\n").unwrap();
        assert_eq!(c.get("lattice.n", 8u32).unwrap(), 32);
        assert!(c.finish().is_err());
        assert_eq!(c.get("horizon", 1.0).unwrap(), 0.5);
        assert_eq!(c.get("lattice.dim", 2usize).unwrap(), 2);
        c.finish().unwrap();
        assert_eq!(c.resolved().get("lattice.dim").map(String::as_str), Some("2"));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("novalue\n").is_err());
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::parse("a..b = 1\n").is_err());
        let mut c = Config::parse("x = abc\n").unwrap();
        assert!(c.get("x", 1.0).is_err());
    }

    #[test]
    fn hash_depends_on_values_and_seed() {
        let mut a = Config::parse("x = 1\n").unwrap();
        a.get("x", 0u32).unwrap();
        let mut b = Config::parse("x = 2\n").unwrap();
        b.get("x", 0u32).unwrap();
        assert_ne!(a.hash("mdla", 1), b.hash("mdla", 1));
        assert_ne!(a.hash("mdla", 1), a.hash("mdla", 2));
        assert_eq!(a.hash("mdla", 1).len(), 64);
    }
}
