//! Raw encoder + sensor logs and their CSV form.
//!
//! ```text
//! # robot=plastic
//! # seed=42
//! t_ms,encoder_ticks,sensor_raw
//! 0,0,1024
//! 10,8,1025
//! ```
//!
//! The writer is canonical (`\n` endings, plain integers, no trailing space)
//! and `write(parse(x)) == x` byte-for-byte for any file it produced.

use std::fmt::Write as _;

use thiserror::Error;

pub const TRACE_HEADER: &str = "t_ms,encoder_ticks,sensor_raw";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: expected header `{TRACE_HEADER}`, found `{found}`")]
    Header { line: usize, found: String },
    #[error("missing header `{TRACE_HEADER}`")]
    MissingHeader,
    #[error("line {line}: malformed metadata `{text}` (expected `# key=value`)")]
    Metadata { line: usize, text: String },
    #[error("line {line}: expected 3 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: non-numeric {column} `{value}`")]
    NonNumeric {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: negative t_ms {value}")]
    NegativeTime { line: usize, value: i64 },
    #[error("line {line}: t_ms {t_ms} does not increase past {previous}")]
    NonMonotonic { line: usize, previous: u64, t_ms: u64 },
    #[error("invalid metadata entry `{key}`: {reason}")]
    InvalidMeta { key: String, reason: &'static str },
}

/// One logged reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sample {
    pub t_ms: u64,
    pub encoder_ticks: i64,
    /// ADC code for hall sensors, count for counters.
    pub sensor_raw: i64,
}

impl Sample {
    pub fn new(t_ms: u64, encoder_ticks: i64, sensor_raw: i64) -> Self {
        Self {
            t_ms,
            encoder_ticks,
            sensor_raw,
        }
    }
}

/// Parses one data row (no line terminator). `line` is used for diagnostics.
pub(crate) fn parse_row(text: &str, line: usize) -> Result<Sample, TraceError> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 3 {
        return Err(TraceError::FieldCount {
            line,
            found: fields.len(),
        });
    }
    let int = |idx: usize, column: &'static str| -> Result<i64, TraceError> {
        fields[idx].parse::<i64>().map_err(|_| TraceError::NonNumeric {
            line,
            column,
            value: fields[idx].to_string(),
        })
    };
    let t = int(0, "t_ms")?;
    let ticks = int(1, "encoder_ticks")?;
    let raw = int(2, "sensor_raw")?;
    if t < 0 {
        return Err(TraceError::NegativeTime { line, value: t });
    }
    Ok(Sample::new(t as u64, ticks, raw))
}

/// Time-ordered log with `key=value` metadata (robot, drum, route, seed, ...).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    meta: Vec<(String, String)>,
    samples: Vec<Sample>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets or replaces a metadata entry, keeping insertion order.
    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<(), TraceError> {
        let key = key.into();
        let value = value.into();
        let bad = |reason| TraceError::InvalidMeta {
            key: key.clone(),
            reason,
        };
        if key.is_empty() {
            return Err(bad("empty key"));
        }
        if key.contains('=') || key.contains(char::is_whitespace) {
            return Err(bad("key may not contain `=` or whitespace"));
        }
        if value.contains(['\n', '\r']) || value.ends_with(char::is_whitespace) {
            return Err(bad("value may not contain newlines or trailing whitespace"));
        }
        match self.meta.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key, value)),
        }
        Ok(())
    }

    /// Appends a sample; timestamps must strictly increase.
    pub fn push(&mut self, sample: Sample) -> Result<(), TraceError> {
        if let Some(last) = self.samples.last() {
            if sample.t_ms <= last.t_ms {
                return Err(TraceError::NonMonotonic {
                    line: self.samples.len() + 1,
                    previous: last.t_ms,
                    t_ms: sample.t_ms,
                });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        self.samples.truncate(n);
    }

    pub fn parse_csv(text: &str) -> Result<Self, TraceError> {
        let mut trace = Trace::new();
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut lines = body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate();
        let mut header_seen = false;
        for (idx, line) in lines.by_ref() {
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let entry = rest.strip_prefix(' ').and_then(|r| r.split_once('='));
                let (k, v) = entry.ok_or_else(|| TraceError::Metadata {
                    line: lineno,
                    text: line.to_string(),
                })?;
                trace.set_meta(k, v).map_err(|_| TraceError::Metadata {
                    line: lineno,
                    text: line.to_string(),
                })?;
                continue;
            }
            if line != TRACE_HEADER {
                return Err(TraceError::Header {
                    line: lineno,
                    found: line.to_string(),
                });
            }
            header_seen = true;
            break;
        }
        if !header_seen {
            return Err(TraceError::MissingHeader);
        }
        for (idx, line) in lines {
            let lineno = idx + 1;
            let sample = parse_row(line, lineno)?;
            trace.push(sample).map_err(|e| match e {
                TraceError::NonMonotonic { previous, t_ms, .. } => TraceError::NonMonotonic {
                    line: lineno,
                    previous,
                    t_ms,
                },
                other => other,
            })?;
        }
        Ok(trace)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 + self.samples.len() * 20);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.t_ms, s.encoder_ticks, s.sensor_raw);
        }
        out
    }
}

pub fn parse_trace_csv(text: &str) -> Result<Trace, TraceError> {
    Trace::parse_csv(text)
}

pub fn write_trace_csv(trace: &Trace) -> String {
    trace.to_csv()
}
