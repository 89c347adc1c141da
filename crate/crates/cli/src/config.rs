//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! lambda = 2,4,6
//! seed = 7
//! mode = exact
//! ```
//!
//! Keys starting with `doc.` are echoed into the report and otherwise ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// How an experiment obtains its numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            _ => Err(format!("mode `{s}` is not exact or sampled")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", i + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(ExperimentConfig { values })
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    /// Builder-style setter, mostly for tests and overrides.
    pub fn with(mut self, key: &str, value: impl Display) -> ExperimentConfig {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")?
            .ok_or_else(|| CliError::Config("a seed is required (config key `seed` or --seed)".into()))
    }

    /// Rejects keys outside `allowed`, `seed`, `mode`, `experiment` and `doc.*`.
    pub fn check_keys(&self, experiment: &str, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.values.keys() {
            let known = k.starts_with("doc.")
                || ["seed", "mode", "experiment"].contains(&k.as_str())
                || allowed.contains(&k.as_str());
            if !known {
                return Err(CliError::Config(format!(
                    "unknown key `{k}` for {experiment}; expected one of {}",
                    allowed.join(", ")
                )));
            }
        }
        if let Some(e) = self.values.get("experiment") {
            if e != experiment {
                return Err(CliError::Config(format!(
                    "config is for `{e}` but the command is `{experiment}`"
                )));
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn list_or<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<T>()
                        .map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{p}`: {e}")))
                })
                .collect(),
        }
    }

    /// Value in `[lo, hi]`.
    pub fn ranged<T: FromStr + PartialOrd + Display + Copy>(&self, key: &str, default: T, lo: T, hi: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = self.get_or(key, default)?;
        if v < lo || v > hi {
            return Err(CliError::Config(format!("key `{key}` = {v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    /// Every key and value as given, in key order.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_types() {
        let c = ExperimentConfig::parse("# x\nlambda = 2, 4\n\nseed=3 # trailing\neps = 0.5\n").unwrap();
        assert_eq!(c.list_or::<u32>("lambda", &[]).unwrap(), vec![2, 4]);
        assert_eq!(c.seed().unwrap(), 3);
        assert_eq!(c.get_or("eps", 0.0).unwrap(), 0.5);
        assert_eq!(c.get_or("trials", 9usize).unwrap(), 9);
        let e = ExperimentConfig::parse("q =").unwrap();
        assert!(e.list_or::<u32>("q", &[1]).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("lambda 2").is_err());
        assert!(ExperimentConfig::parse("a=1\na=2").is_err());
        let c = ExperimentConfig::parse("lambda = x").unwrap();
        assert!(c.get::<u32>("lambda").is_err());
        assert!(c.seed().is_err());
        assert!(c.check_keys("qefid-sd", &["trials"]).is_err());
        assert!(c.check_keys("qefid-sd", &["lambda"]).is_ok());
        let d = ExperimentConfig::default().with("experiment", "copygen");
        assert!(d.check_keys("qefid-sd", &[]).is_err());
        let r = ExperimentConfig::default().with("eps", 2.0);
        assert!(r.ranged("eps", 0.5, 0.0, 1.0).is_err());
    }
}
