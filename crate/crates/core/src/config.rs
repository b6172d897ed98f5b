//! Flat `key = value` configuration text.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys are
//! consumed by typed `take_*` calls; [`KvMap::finish`] rejects whatever was
//! never consumed, so misspelt keys are errors rather than silent defaults.

use std::fmt::Display;
use std::str::FromStr;

use indexmap::IndexMap;

use crate::error::{CogError, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvMap {
    entries: IndexMap<String, (String, usize)>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = IndexMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CogError::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(CogError::Config(format!("line {line_no}: invalid key `{key}`")));
            }
            if entries
                .insert(key.to_string(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(CogError::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            entries: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), (v.into(), 0)))
                .collect(),
        }
    }

    /// Inserts or replaces a pair (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn where_(line: usize) -> String {
        if line == 0 {
            String::new()
        } else {
            format!("line {line}: ")
        }
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.shift_remove(key).map(|(v, _)| v)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.shift_remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                CogError::Config(format!("{}cannot parse `{v}` for key `{key}`", Self::where_(line)))
            }),
        }
    }

    /// Overwrites `slot` when the key is present.
    pub fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.shift_remove(key) {
            None => Ok(None),
            Some((v, line)) => {
                if v.is_empty() {
                    return Ok(Some(Vec::new()));
                }
                v.split(',')
                    .map(|item| {
                        item.trim().parse().map_err(|_| {
                            CogError::Config(format!(
                                "{}cannot parse list item `{}` for key `{key}`",
                                Self::where_(line),
                                item.trim()
                            ))
                        })
                    })
                    .collect::<Result<Vec<T>>>()
                    .map(Some)
            }
        }
    }

    /// Parses with a custom function, e.g. enum names.
    pub fn take_with<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.entries.shift_remove(key) {
            None => Ok(None),
            Some((v, line)) => parse(&v).map(Some).ok_or_else(|| {
                CogError::Config(format!("{}invalid value `{v}` for key `{key}`", Self::where_(line)))
            }),
        }
    }

    /// Errors if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self
            .entries
            .iter()
            .map(|(k, (_, line))| format!("{}`{k}`", Self::where_(*line)))
            .collect();
        Err(CogError::Config(format!("unknown keys: {}", keys.join(", "))))
    }
}

/// Renders pairs as config text, one `key = value` per line.
pub fn format_kv<K: Display, V: Display>(pairs: impl IntoIterator<Item = (K, V)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

/// Comma-joined list value.
pub fn join_list<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let mut kv = KvMap::parse("# header\nd = 1024  # dim\n\nsizes = 784, 360,360\nname=maze\n").unwrap();
        assert_eq!(kv.take::<usize>("d").unwrap(), Some(1024));
        assert_eq!(kv.take_list::<usize>("sizes").unwrap(), Some(vec![784, 360, 360]));
        assert_eq!(kv.take_raw("name").as_deref(), Some("maze"));
        assert_eq!(kv.take::<f64>("absent").unwrap(), None);
        kv.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut kv = KvMap::parse("a = 1\nbogus = 2\n").unwrap();
        kv.take::<u32>("a").unwrap();
        let err = kv.finish().unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line 2"));
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(KvMap::parse("no equals sign").is_err());
        assert!(KvMap::parse("a = 1\na = 2").is_err());
        assert!(KvMap::parse("two words = 1").is_err());
        let mut kv = KvMap::parse("x = abc").unwrap();
        assert!(kv.take::<f64>("x").is_err());
    }

    #[test]
    fn empty_list_value() {
        let mut kv = KvMap::parse("hidden =").unwrap();
        assert_eq!(kv.take_list::<usize>("hidden").unwrap(), Some(vec![]));
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.1f64, 1e-300, 0.05, 1.0 / 3.0] {
            let text = format_kv([("v", v)]);
            let mut kv = KvMap::parse(&text).unwrap();
            assert_eq!(kv.take::<f64>("v").unwrap().unwrap().to_bits(), v.to_bits());
        }
    }
}
