//! Plain `key = value` configuration files.
//!
//! Every tuning constant of the pipeline ships in one of the files under
//! `configs/`, embedded at compile time. Lines starting with `#` are comments;
//! list values are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const FUSION_WRIST_3: &str = include_str!("../configs/fusion-wrist-3.cfg");
pub const FUSION_WRIST_2: &str = include_str!("../configs/fusion-wrist-2.cfg");
pub const FUSION_CHEST_3: &str = include_str!("../configs/fusion-chest-3.cfg");
pub const FUSION_CHEST_2: &str = include_str!("../configs/fusion-chest-2.cfg");
pub const LEARNERS: &str = include_str!("../configs/learners.cfg");
pub const PREPROCESS: &str = include_str!("../configs/preprocess.cfg");
pub const FEATURES: &str = include_str!("../configs/features.cfg");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: cannot parse item `{s}`")))
            })
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
