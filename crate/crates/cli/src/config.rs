//! `key=value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value", k + 1);
            };
            let key = key.trim().replace('_', "-");
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", k + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    /// The flag value if given, else the config value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Every key, for recording in report headers.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let c = ConfigFile::parse("# run\nepochs = 5\nmc_samples=3\n").unwrap();
        assert_eq!(c.or(None, "epochs", 20usize).unwrap(), 5);
        assert_eq!(c.or(Some(7), "epochs", 20usize).unwrap(), 7);
        assert_eq!(c.or(None, "mc-samples", 5usize).unwrap(), 3);
        assert_eq!(c.or(None, "seed", 42u64).unwrap(), 42);
        assert!(c.pick::<f64>(None, "epochs").is_ok());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigFile::parse("epochs 5").is_err());
        assert!(ConfigFile::parse("a=1\na=2").is_err());
        let c = ConfigFile::parse("epochs=many").unwrap();
        assert!(c.pick::<usize>(None, "epochs").is_err());
    }
}
