//! Optional `key = value` defaults file. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pvc_core::{Error, Result};

const KEYS: &[&str] = &[
    "precision",
    "depth",
    "model",
    "weights",
    "ablation",
    "k",
    "jobs",
    "models",
    "depths",
    "seed",
];

pub const WEIGHTS_ENV: &str = "PVC_WEIGHTS";

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| pvc_core::with_path(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(format!("line {}: unknown key '{key}'", n + 1));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| Error::Config(format!("config key '{key}' = '{v}': {e}")))
            })
            .transpose()
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Weights path from the flag, the config file or the environment.
    pub fn weights(&self, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        if flag.is_some() {
            return Ok(flag);
        }
        if let Some(p) = self.get::<PathBuf>("weights")? {
            return Ok(Some(p));
        }
        Ok(std::env::var_os(WEIGHTS_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from))
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| Error::Config(format!("bad {what} '{s}': {e}")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty {what} list")));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let cfg = ConfigFile::parse("# defaults\nprecision = 9\nmodel=uniform\n").unwrap();
        assert_eq!(cfg.pick(None, "precision", 10u8).unwrap(), 9);
        assert_eq!(cfg.pick(Some(7), "precision", 10u8).unwrap(), 7);
        assert_eq!(cfg.pick(None, "depth", 3u8).unwrap(), 3);
        assert_eq!(
            cfg.get::<String>("model").unwrap().as_deref(),
            Some("uniform")
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("precision").is_err());
        let cfg = ConfigFile::parse("precision = lots").unwrap();
        assert!(cfg.get::<u8>("precision").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<u8>("6, 7,8", "depth").unwrap(), vec![6, 7, 8]);
        assert!(parse_list::<u8>(",", "depth").is_err());
        assert!(parse_list::<u8>("6,x", "depth").is_err());
    }
}
