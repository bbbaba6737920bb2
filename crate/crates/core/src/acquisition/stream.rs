//! Newline-framed live feed of trace rows.
//!
//! Each frame is one CSV data row terminated by `\n` (a preceding `\r` is
//! ignored). A malformed frame yields one error and decoding resumes at the
//! next newline.

use thiserror::Error;

use super::trace::{parse_row, Sample, TraceError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame {frame}: {source}")]
    Malformed {
        frame: usize,
        #[source]
        source: TraceError,
    },
    #[error("frame {frame}: not valid UTF-8")]
    Encoding { frame: usize },
    #[error("frame is not newline terminated")]
    Unterminated,
}

/// Decodes a single framed record such as `"1500,3072,610\n"`.
pub fn stream_decode(frame: &str) -> Result<Sample, FrameError> {
    let body = frame.strip_suffix('\n').ok_or(FrameError::Unterminated)?;
    decode_body(body, 1)
}

fn decode_body(body: &str, frame: usize) -> Result<Sample, FrameError> {
    let body = body.strip_suffix('\r').unwrap_or(body);
    parse_row(body, frame).map_err(|source| FrameError::Malformed { frame, source })
}

/// Incremental decoder for a byte stream that may split frames arbitrarily.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    pending: Vec<u8>,
    frames: usize,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds bytes and returns every frame completed by them, in order.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Sample, FrameError>> {
        let mut out = Vec::new();
        for &b in bytes {
            if b == b'\n' {
                self.frames += 1;
                let frame = std::mem::take(&mut self.pending);
                out.push(match std::str::from_utf8(&frame) {
                    Ok(text) => decode_body(text, self.frames),
                    Err(_) => Err(FrameError::Encoding { frame: self.frames }),
                });
            } else {
                self.pending.push(b);
            }
        }
        out
    }

    /// Bytes received since the last newline.
    pub fn pending(&self) -> &[u8] {
        &self.pending
    }

    /// Number of complete frames seen so far.
    pub fn frames(&self) -> usize {
        self.frames
    }
}
