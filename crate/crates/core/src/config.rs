//! Sectioned key-value configuration files.
//!
//! The format is line oriented:
//!
//! ```text
//! # comment
//! [segment]
//! kind = straight
//! length_m = 0.5
//! ```
//!
//! Sections may repeat (one `[segment]` per pipe segment, one `[source]` per
//! planted source). Every error carries the 1-based line number it refers to.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::new(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::new(line, format!("invalid section name `{name}`")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::new(line, "empty key"));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| ConfigError::new(line, format!("key `{key}` outside of any section")))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::new(line, format!("duplicate key `{key}`")));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { sections })
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    /// The single section called `name`, if present. Repeats are an error.
    pub fn unique(&self, name: &str) -> Result<Option<&Section>, ConfigError> {
        let mut it = self.sections.iter().filter(|s| s.name == name);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(ConfigError::new(
                dup.line,
                format!("section [{name}] given more than once"),
            ));
        }
        Ok(first)
    }

    /// Rejects any section whose name is not in `allowed`.
    pub fn expect_sections(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for s in &self.sections {
            if !allowed.contains(&s.name.as_str()) {
                return Err(ConfigError::new(
                    s.line,
                    format!("unknown section [{}] (expected one of: {})", s.name, allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }
}

impl Section {
    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Rejects keys not in `allowed`; catches typos such as `lenght_m`.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(ConfigError::new(
                    e.line,
                    format!("unknown key `{}` in [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| ConfigError::new(e.line, format!("invalid value `{}` for `{key}`: {err}", e.value))),
        }
    }

    pub fn require<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| ConfigError::new(self.line, format!("[{}] is missing required key `{key}`", self.name)))
    }

    /// Parses a finite float and reports the key's line on failure.
    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(ConfigError::new(
                self.entry(key).map_or(self.line, |e| e.line),
                format!("`{key}` must be finite"),
            )),
            other => Ok(other),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?
            .ok_or_else(|| ConfigError::new(self.line, format!("[{}] is missing required key `{key}`", self.name)))
    }

    /// Line of `key` if present, else the section header line.
    pub fn line_of(&self, key: &str) -> usize {
        self.entry(key).map_or(self.line, |e| e.line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_repeated_sections() {
        let doc = Document::parse("# c\n[a]\nx = 1\n\n[a]\nx=2\n; other\n[b]\ny = hello world\n").unwrap();
        assert_eq!(doc.sections.len(), 3);
        let xs: Vec<i32> = doc.sections_named("a").map(|s| s.require("x").unwrap()).collect();
        assert_eq!(xs, vec![1, 2]);
        let b = doc.unique("b").unwrap().unwrap();
        assert_eq!(b.entry("y").unwrap().value, "hello world");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Document::parse("[a]\nx = 1\ngarbage\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = Document::parse("x = 1\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = Document::parse("[a]\nx=1\nx=2\n").unwrap_err();
        assert_eq!(err.line, 3);
        let doc = Document::parse("[a]\n\nx = abc\n").unwrap();
        let err = doc.sections[0].get_f64("x").unwrap_err();
        assert_eq!(err.line, 3);
        let err = doc.sections[0].expect_keys(&["y"]).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn unique_rejects_repeats() {
        let doc = Document::parse("[a]\n[a]\n").unwrap();
        assert_eq!(doc.unique("a").unwrap_err().line, 2);
        assert!(doc.unique("z").unwrap().is_none());
    }

    #[test]
    fn non_finite_rejected() {
        let doc = Document::parse("[a]\nx = NaN\n").unwrap();
        assert!(doc.sections[0].get_f64("x").is_err());
    }
}
