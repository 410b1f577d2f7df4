//! Flat key-value settings: a TOML config file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use kfs_core::Kernel;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Reads a flat TOML table. Arrays become comma-separated lists.
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse()?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let v = match value {
                toml::Value::Array(items) => items
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                other => scalar(&other)?,
            };
            values.insert(key.replace('-', "_"), v);
        }
        Ok(Self { values })
    }

    /// Flags win over file values.
    pub fn overlay(&mut self, flags: impl IntoIterator<Item = (String, String)>) {
        for (k, v) in flags {
            self.values.insert(k.replace('-', "_"), v);
        }
    }

    /// Fails on any key outside `allowed`.
    pub fn restrict_to(&self, command: &str, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "`{key}` is not a setting of `{command}` (allowed: {})",
                    allowed.join(", ")
                );
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|e| anyhow!("invalid value `{s}` for `{key}`: {e}"))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| anyhow!("missing required setting `{key}`"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(s) = self.raw(key) else {
            return Ok(None);
        };
        let items = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<T>()
                    .map_err(|e| anyhow!("invalid entry `{p}` in `{key}`: {e}"))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            bail!("`{key}` is an empty list");
        }
        Ok(Some(items))
    }

    pub fn list_or<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.list(key)?.unwrap_or(default))
    }

    pub fn kernels(&self) -> Result<Vec<Kernel>> {
        self.list_or("kernel", vec![Kernel::Linear])
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.get_or(key, false)
    }

    /// The master seed; required wherever randomness is used.
    pub fn seed(&self) -> Result<u64> {
        self.get("seed")?
            .ok_or_else(|| anyhow!("--seed is required: there is no default or time-based seed"))
    }

    pub fn workers(&self) -> Result<usize> {
        let w: usize = self.get_or("workers", 1)?;
        if w == 0 {
            bail!("--workers must be >= 1");
        }
        Ok(w)
    }
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("nested value `{other}` is not allowed in a flat config"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut s = Settings::from_toml_str(
            "seed = 5\nn = [2, 10]\ndelta = 0.2\nkernel = \"gauss:1\"\nas-printed = true\n",
        )
        .unwrap();
        assert_eq!(s.list::<usize>("n").unwrap().unwrap(), vec![2, 10]);
        assert!(s.flag("as_printed").unwrap());
        s.overlay([("delta".to_string(), "0.3,0.4".to_string())]);
        assert_eq!(s.list::<f64>("delta").unwrap().unwrap(), vec![0.3, 0.4]);
        assert_eq!(s.seed().unwrap(), 5);
        assert_eq!(s.kernels().unwrap(), vec![Kernel::gaussian(1.0).unwrap()]);
    }

    #[test]
    fn validation_errors() {
        let s = Settings::from_toml_str("n = \"a\"\n").unwrap();
        assert!(s.list::<usize>("n").is_err());
        assert!(s.restrict_to("bounds", &["k"]).is_err());
        assert!(Settings::default().seed().is_err());
        assert!(Settings::from_toml_str("[table]\nx = 1\n").is_err());
        let s = Settings::from_toml_str("workers = 0\n").unwrap();
        assert!(s.workers().is_err());
    }
}
