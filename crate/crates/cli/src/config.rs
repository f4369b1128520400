//! Flat `key=value` config files. Command-line flags win over file entries.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "q", "alpha", "beta", "lambda", "n-start", "steps", "y0", "seed", "tol", "format", "t", "s", "nu", "t0", "gamma",
    "lipschitz", "mu", "cases", "problem", "forcing", "rhs", "max-iter",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::format(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::format(format!("config line {}: expected key=value", n + 1)))?;
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::format(format!("config line {}: unknown key `{key}`", n + 1)));
            }
            entries.insert(key, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// The flag value if given, else the parsed file entry, else `None`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::format(format!("config value `{v}` for `{key}` is not valid"))),
        }
    }

    pub fn pick_or<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        Ok(self.pick(key, flag)?.unwrap_or(default))
    }
}
