//! Minimal `key=value` parameter files. Blank lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub(crate) struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub(crate) fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::param(format!(
                    "line {}: expected key=value, found {line:?}",
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::param(format!(
                    "line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
        }
        Ok(KeyValues { entries })
    }

    pub(crate) fn required(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::param(format!("missing key {key:?}")))
    }

    pub(crate) fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.required(key)?;
        raw.parse()
            .map_err(|_| Error::param(format!("bad value {raw:?} for {key:?}")))
    }

    pub(crate) fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::param(format!("bad value {raw:?} for {key:?}"))),
        }
    }

    pub(crate) fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::param(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}
