//! Plain-text run configuration: one `key = value` per line, `#` comments.
//! Keys are long flag names (`-` and `_` are interchangeable). Flags given on
//! the command line win over the file; keys no command consumes are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config key `{key}` given twice")));
            }
        }
        Ok(Self { entries })
    }

    /// Removes and parses `key`; the flag value, when present, takes precedence.
    pub fn take<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = match self.entries.remove(key) {
            Some(v) => Some(
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))?,
            ),
            None => None,
        };
        Ok(flag.or(from_file))
    }

    pub fn take_flag(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.take::<bool>(key, None)?.unwrap_or(false))
    }

    /// Errors if any key was not consumed.
    pub fn finish(self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.entries.into_keys().collect();
            Err(CliError::Usage(format!("unknown config key(s): {}", keys.join(", "))))
        }
    }
}
