//! Plain-text `key = value` configuration files.
//!
//! The dataset calibration file, scenario configs, and experiment specs all
//! share this format: one `key = value` per line, `#` starts a comment,
//! blank lines ignored. Keys are case-sensitive. Values keep their raw text;
//! typed accessors parse on demand and report the offending line.

use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("{path}:{line}: expected 'key = value', got '{text}'")]
    Malformed {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: duplicate key '{key}'")]
    Duplicate {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}: missing required key '{key}'")]
    Missing { path: String, key: String },
    #[error("{path}:{line}: key '{key}': cannot parse '{value}' as {ty}")]
    BadValue {
        path: String,
        line: usize,
        key: String,
        value: String,
        ty: &'static str,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed key-value file with typed, error-reporting accessors.
#[derive(Clone, Debug, Default)]
pub struct KvFile {
    path: String,
    entries: BTreeMap<String, Entry>,
}

impl KvFile {
    pub fn parse(text: &str, path: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(KvError::Malformed {
                    path: path.to_string(),
                    line,
                    text: stripped.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), Entry { value, line }).is_some() {
                return Err(KvError::Duplicate {
                    path: path.to_string(),
                    line,
                    key,
                });
            }
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, KvError> {
        let text = std::fs::read_to_string(path).map_err(|source| KvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, key: &str) -> Result<&str, KvError> {
        self.get_str(key).ok_or_else(|| KvError::Missing {
            path: self.path.clone(),
            key: key.to_string(),
        })
    }

    fn parse_with<T: std::str::FromStr>(&self, key: &str, ty: &'static str) -> Result<T, KvError> {
        let entry = self.entries.get(key).ok_or_else(|| KvError::Missing {
            path: self.path.clone(),
            key: key.to_string(),
        })?;
        entry.value.parse::<T>().map_err(|_| KvError::BadValue {
            path: self.path.clone(),
            line: entry.line,
            key: key.to_string(),
            value: entry.value.clone(),
            ty,
        })
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, KvError> {
        self.parse_with(key, "float")
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, KvError> {
        self.parse_with(key, "integer")
    }

    pub fn require_usize(&self, key: &str) -> Result<usize, KvError> {
        self.parse_with(key, "integer")
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, KvError> {
        if self.contains(key) {
            self.require_f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, KvError> {
        if self.contains(key) {
            self.require_u64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, KvError> {
        if self.contains(key) {
            self.require_usize(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, KvError> {
        match self.get_str(key) {
            None => Ok(None),
            Some("true") | Some("1") => Ok(Some(true)),
            Some("false") | Some("0") => Ok(Some(false)),
            Some(other) => {
                let entry = &self.entries[key];
                Err(KvError::BadValue {
                    path: self.path.clone(),
                    line: entry.line,
                    key: key.to_string(),
                    value: other.to_string(),
                    ty: "bool",
                })
            }
        }
    }

    /// Whitespace-separated float list (e.g. a stored matrix or vector).
    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>, KvError> {
        let entry = self.entries.get(key).ok_or_else(|| KvError::Missing {
            path: self.path.clone(),
            key: key.to_string(),
        })?;
        entry
            .value
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| KvError::BadValue {
                    path: self.path.clone(),
                    line: entry.line,
                    key: key.to_string(),
                    value: tok.to_string(),
                    ty: "float",
                })
            })
            .collect()
    }
}

/// Serializes values in shortest-round-trip decimal so exports re-ingest
/// bit-exactly.
pub struct KvWriter {
    buf: String,
}

impl KvWriter {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        for line in header.lines() {
            buf.push_str("# ");
            buf.push_str(line);
            buf.push('\n');
        }
        Self { buf }
    }

    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.buf.push_str(key);
        self.buf.push_str(" = ");
        self.buf.push_str(&value.to_string());
        self.buf.push('\n');
    }

    pub fn put_f64_list(&mut self, key: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        self.put(key, joined.join(" "));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
