//! Plain-text dump of `.clsf` streams.
//!
//! ```text
//! # clsf dump v1
//! frame flags=01
//! payload 686920
//! llr 4
//! llr -1.5
//! ...
//! end
//! ```
//!
//! LLR lines hold the dequantized value `q / 128`, printed in shortest
//! round-trip form, so the dump converts back to identical frame bytes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::frame::{quantize_llr, Frame, FLAG_LLR, FRAC_BITS};

pub const DUMP_HEADER: &str = "# clsf dump v1";

#[derive(Debug, Error, PartialEq)]
#[error("dump line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

pub fn to_dump(frames: &[Frame]) -> String {
    let mut out = String::new();
    writeln!(out, "{DUMP_HEADER}").unwrap();
    for frame in frames {
        writeln!(out, "frame flags={:02x}", frame.flags).unwrap();
        writeln!(out, "payload {}", hex::encode(&frame.payload)).unwrap();
        for &q in &frame.llrs_q {
            writeln!(out, "llr {}", q as f64 / (1 << FRAC_BITS) as f64).unwrap();
        }
        writeln!(out, "end").unwrap();
    }
    out
}

pub fn from_dump(text: &str) -> Result<Vec<Frame>, DumpError> {
    let err = |line: usize, message: String| DumpError { line, message };
    let mut frames = Vec::new();
    let mut current: Option<(Frame, bool)> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        match (key, current.as_mut()) {
            ("frame", None) => {
                let flags = value
                    .strip_prefix("flags=")
                    .and_then(|f| u8::from_str_radix(f, 16).ok())
                    .ok_or_else(|| err(n, format!("bad frame line {line:?}")))?;
                current = Some((
                    Frame {
                        payload: Vec::new(),
                        llrs_q: Vec::new(),
                        flags,
                    },
                    false,
                ));
            }
            ("payload", Some((frame, seen))) if !*seen => {
                frame.payload = hex::decode(value).map_err(|e| err(n, format!("bad payload hex: {e}")))?;
                *seen = true;
            }
            ("llr", Some((frame, true))) => {
                let x: f64 = value.parse().map_err(|e| err(n, format!("bad LLR {value:?}: {e}")))?;
                frame
                    .llrs_q
                    .push(quantize_llr(x).map_err(|e| err(n, e.to_string()))?);
            }
            ("end", Some((_, true))) => {
                let (frame, _) = current.take().unwrap();
                let expected = if frame.flags & FLAG_LLR != 0 {
                    8 * frame.payload.len()
                } else {
                    0
                };
                if frame.llrs_q.len() != expected {
                    return Err(err(
                        n,
                        format!("frame has {} LLRs, expected {expected}", frame.llrs_q.len()),
                    ));
                }
                frames.push(frame);
            }
            _ => return Err(err(n, format!("unexpected line {line:?}"))),
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "missing `end`".into()));
    }
    Ok(frames)
}
