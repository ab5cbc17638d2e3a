//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted paths such
//! as `object.0.depth`. Later assignments override earlier ones.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("key '{key}': cannot parse '{value}': {msg}")]
    BadValue { key: String, value: String, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = FlatConfig::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            cfg.set(key, value.trim());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
                msg: e.to_string(),
            }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn overlay(&mut self, other: &FlatConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Rejects keys that no consumer recognises.
    pub fn check_known(&self, known: impl Fn(&str) -> bool) -> Result<(), ConfigError> {
        match self.keys().find(|k| !known(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for FlatConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blanks_and_overrides() {
        let cfg = FlatConfig::parse("# scene\nwidth = 64\n\nheight=48 # rows\nwidth = 80\n").unwrap();
        assert_eq!(cfg.get::<u16>("width").unwrap(), Some(80));
        assert_eq!(cfg.get::<u16>("height").unwrap(), Some(48));
        assert_eq!(cfg.get::<u16>("depth").unwrap(), None);
        assert_eq!(cfg.get_or("depth", 3.5f64).unwrap(), 3.5);
    }

    #[test]
    fn syntax_and_value_errors() {
        assert_eq!(FlatConfig::parse("a = 1\njunk\n"), Err(ConfigError::Syntax { line: 2 }));
        assert_eq!(FlatConfig::parse(" = 4"), Err(ConfigError::Syntax { line: 1 }));
        let cfg = FlatConfig::parse("width = wide").unwrap();
        assert!(matches!(cfg.get::<u16>("width"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn display_reparses_to_same_config() {
        let cfg = FlatConfig::parse("b = 2\na = x y\n").unwrap();
        assert_eq!(cfg.to_string(), "a = x y\nb = 2\n");
        assert_eq!(FlatConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
