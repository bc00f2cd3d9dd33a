//! `key=value` text files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys may
//! repeat (for example `box=` in scene files); accessors report the line of
//! the offending entry on error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

#[derive(Debug, Clone)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct KvFile {
    path: PathBuf,
    entries: Vec<Entry>,
}

impl KvFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: impl AsRef<Path>, text: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::parse(
                    &path,
                    line,
                    format!("expected key=value, got {content:?}"),
                ));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(&path, line, "empty key"));
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
        Ok(Self { path, entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Last entry for `key`.
    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => self.parse_value(e).map(Some),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::parse(&self.path, 0, format!("missing required key `{key}`")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn parse_value<T: FromStr>(&self, e: &Entry) -> Result<T> {
        e.value.parse().map_err(|_| {
            Error::parse(
                &self.path,
                e.line,
                format!("bad value for `{}`: {:?}", e.key, e.value),
            )
        })
    }

    /// Whitespace-separated numbers.
    pub fn parse_numbers(&self, e: &Entry, expected: usize) -> Result<Vec<f64>> {
        let nums: Vec<f64> = e
            .value
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::parse(
                    &self.path,
                    e.line,
                    format!("bad number list for `{}`", e.key),
                )
            })?;
        if nums.len() != expected {
            return Err(Error::parse(
                &self.path,
                e.line,
                format!("`{}` expects {expected} numbers, got {}", e.key, nums.len()),
            ));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(
                &self.path,
                e.line,
                format!("non-finite value in `{}`", e.key),
            ));
        }
        Ok(nums)
    }

    pub fn transform(&self, key: &str) -> Result<Option<RigidTransform>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        let nums = self.parse_numbers(e, 12)?;
        let mut arr = [0.0; 12];
        arr.copy_from_slice(&nums);
        RigidTransform::from_row_major(&arr)
            .map(Some)
            .map_err(|err| Error::parse(&self.path, e.line, err.to_string()))
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        match self
            .entries
            .iter()
            .find(|e| !allowed.contains(e.key.as_str()))
        {
            Some(e) => Err(Error::parse(
                &self.path,
                e.line,
                format!("unknown key `{}`", e.key),
            )),
            None => Ok(()),
        }
    }
}

/// Formats a transform as the 12-number `r00..r22 tx ty tz` value.
pub fn format_transform(xf: &RigidTransform) -> String {
    let mut s = String::new();
    for (i, v) in xf.to_row_major().iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}
