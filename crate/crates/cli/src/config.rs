//! Flat `key = value` run configuration with dotted keys.
//!
//! Values come from an optional file, then from command-line flags, then
//! from `--set key=value` overrides; later sources win. Relative paths from
//! the file resolve against the file's directory, all others against the
//! working directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};

/// A configuration problem; exits with the config error code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug)]
struct Value {
    raw: String,
    /// Directory relative paths resolve against.
    base: PathBuf,
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = Config::default();
        let Some(path) = path else {
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| config_error(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            cfg.values.insert(
                k.to_string(),
                Value {
                    raw: v.to_string(),
                    base: base.clone(),
                },
            );
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(
            key.to_string(),
            Value {
                raw: value.to_string(),
                base: PathBuf::new(),
            },
        );
    }

    pub fn set_opt<V: ToString>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Apply `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = split_pair(o).ok_or_else(|| config_error(format!("--set expects key=value, got {o:?}")))?;
            self.set(k, v);
        }
        Ok(())
    }

    /// Reject keys outside `known`, which catches typos in config files.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self.values.keys().map(String::as_str).filter(|k| !known.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(config_error(format!(
                "unknown config keys: {} (known: {})",
                unknown.join(", "),
                known.join(", ")
            )));
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|v| v.raw.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| config_error(format!("{key} = {raw:?}: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.get_or(key, false)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| {
            let p = PathBuf::from(&v.raw);
            if p.is_absolute() {
                p
            } else {
                v.base.join(p)
            }
        })
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| config_error(format!("missing required setting {key}")))
    }

    /// Comma-separated path list.
    pub fn paths(&self, key: &str) -> Vec<PathBuf> {
        let Some(v) = self.values.get(key) else {
            return Vec::new();
        };
        v.raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let p = PathBuf::from(s);
                if p.is_absolute() {
                    p
                } else {
                    v.base.join(p)
                }
            })
            .collect()
    }

    /// Effective settings in key order, one `key = value` per line.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {}\n", v.raw));
        }
        out
    }

    /// Write the effective config to `dir/config.txt`.
    pub fn echo_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.txt");
        std::fs::write(&path, self.echo()).with_context(|| format!("writing {}", path.display()))
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k, v.trim()))
}

/// `HxW` pairs such as `30x90`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims(pub usize, pub usize);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Dims(parse(h)?, parse(w)?))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}
