//! Pattern-keyed configuration database.
//!
//! Entries are `(path glob, key, value)` triples. `*` matches exactly one
//! dot-separated path segment, `**` matches any run of segments including
//! none. Precedence is set order: the most recently set matching entry
//! wins, regardless of how specific the pattern is.

use std::fmt;

use thiserror::Error;

/// Matches a dotted component path against a glob pattern.
pub fn glob_match(pattern: &str, path: &str) -> bool {
    fn segs(ps: &[&str], xs: &[&str]) -> bool {
        match ps.split_first() {
            None => xs.is_empty(),
            Some((&"**", rest)) => (0..=xs.len()).any(|k| segs(rest, &xs[k..])),
            Some((&"*", rest)) => !xs.is_empty() && segs(rest, &xs[1..]),
            Some((lit, rest)) => xs.first() == Some(lit) && segs(rest, &xs[1..]),
        }
    }
    let ps: Vec<&str> = pattern.split('.').collect();
    let xs: Vec<&str> = path.split('.').collect();
    segs(&ps, &xs)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CfgValue {
    Bool(bool),
    U64(u64),
    Str(String),
}

impl fmt::Display for CfgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfgValue::Bool(b) => write!(f, "{b}"),
            CfgValue::U64(v) => write!(f, "{v}"),
            CfgValue::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<bool> for CfgValue {
    fn from(v: bool) -> Self {
        CfgValue::Bool(v)
    }
}
impl From<u64> for CfgValue {
    fn from(v: u64) -> Self {
        CfgValue::U64(v)
    }
}
impl From<u32> for CfgValue {
    fn from(v: u32) -> Self {
        CfgValue::U64(v as u64)
    }
}
impl From<&str> for CfgValue {
    fn from(v: &str) -> Self {
        CfgValue::Str(v.to_string())
    }
}
impl From<String> for CfgValue {
    fn from(v: String) -> Self {
        CfgValue::Str(v)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("config line {line}: {reason}")]
pub struct ConfigParseError {
    pub line: usize,
    pub reason: String,
}

struct CfgEntry {
    pattern: String,
    key: String,
    value: CfgValue,
}

/// Ordered store of configuration entries.
#[derive(Default)]
pub struct ConfigDB {
    entries: Vec<CfgEntry>,
}

impl ConfigDB {
    pub fn new() -> Self {
        ConfigDB::default()
    }

    pub fn set(&mut self, pattern: &str, key: &str, value: impl Into<CfgValue>) {
        self.entries.push(CfgEntry {
            pattern: pattern.to_string(),
            key: key.to_string(),
            value: value.into(),
        });
    }

    /// Latest entry whose pattern matches `path` and whose key equals
    /// `key`, if any.
    pub fn get(&self, path: &str, key: &str) -> Option<&CfgValue> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == key && glob_match(&e.pattern, path))
            .map(|e| &e.value)
    }

    pub fn get_bool(&self, path: &str, key: &str) -> Option<bool> {
        match self.get(path, key)? {
            CfgValue::Bool(b) => Some(*b),
            CfgValue::U64(v) => Some(*v != 0),
            CfgValue::Str(s) => s.parse().ok(),
        }
    }

    pub fn get_u64(&self, path: &str, key: &str) -> Option<u64> {
        match self.get(path, key)? {
            CfgValue::U64(v) => Some(*v),
            CfgValue::Bool(b) => Some(*b as u64),
            CfgValue::Str(s) => parse_int(s),
        }
    }

    pub fn get_str(&self, path: &str, key: &str) -> Option<String> {
        self.get(path, key).map(|v| v.to_string())
    }

    /// Loads `pattern key value` lines. Blank lines and `#` comments are
    /// skipped. Values parse as bool, then integer (decimal or 0x hex),
    /// then fall back to string. Returns the number of entries added.
    pub fn load(&mut self, text: &str) -> Result<usize, ConfigParseError> {
        let mut added = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, char::is_whitespace);
            let (pattern, key, value) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(k), Some(v)) if !v.trim().is_empty() => (p, k, v.trim()),
                _ => {
                    return Err(ConfigParseError {
                        line: idx + 1,
                        reason: format!("expected `pattern key value`, got `{line}`"),
                    })
                }
            };
            let value = if value == "true" {
                CfgValue::Bool(true)
            } else if value == "false" {
                CfgValue::Bool(false)
            } else if let Some(v) = parse_int(value) {
                CfgValue::U64(v)
            } else {
                CfgValue::Str(value.to_string())
            };
            self.entries.push(CfgEntry {
                pattern: pattern.to_string(),
                key: key.to_string(),
                value,
            });
            added += 1;
        }
        Ok(added)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_int(s: &str) -> Option<u64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        s.parse().ok()
    }
}
