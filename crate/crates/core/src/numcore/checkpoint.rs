//! Plain-text tensor checkpoint.
//!
//! ```text
//! biofuse-params 1
//! tensors <count>
//! <name> <ndim> <dim_0> ... <dim_n-1>
//! <value> <value> ...            (row-major, one line per tensor)
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is bit-exact. Names must not contain whitespace.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Tensor;

pub const MAGIC: &str = "biofuse-params";
pub const VERSION: u32 = 1;

pub fn encode(tensors: &[(String, Tensor)]) -> Result<String> {
    let mut out = format!("{MAGIC} {VERSION}\ntensors {}\n", tensors.len());
    for (name, t) in tensors {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::param(format!("invalid tensor name {name:?}")));
        }
        out.push_str(name);
        out.push_str(&format!(" {}", t.ndim()));
        for d in t.shape() {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        let vals: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn decode(text: &str) -> Result<Vec<(String, Tensor)>> {
    let mut offset = 0usize;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let start = offset;
        offset += l.len();
        (start, l.trim_end_matches(['\n', '\r']))
    });
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Format {
            offset: text.len(),
            message: format!("unexpected end of file, expected {what}"),
        })
    };
    let fmt_err = |offset: usize, message: String| Error::Format { offset, message };

    let (at, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(fmt_err(at, format!("missing {MAGIC} header")));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(VERSION) => {}
        other => return Err(fmt_err(at, format!("unsupported version {other:?}"))),
    }
    let (at, count_line) = next("tensor count")?;
    let count = count_line
        .strip_prefix("tensors ")
        .and_then(|c| c.trim().parse::<usize>().ok())
        .ok_or_else(|| fmt_err(at, "malformed tensor count".into()))?;

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (at, head) = next("tensor header")?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        let bad_head = || fmt_err(at, format!("malformed tensor header {head:?}"));
        let name = fields.first().ok_or_else(bad_head)?.to_string();
        let ndim: usize = fields.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad_head)?;
        if fields.len() != ndim + 2 {
            return Err(bad_head());
        }
        let shape = fields[2..]
            .iter()
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad_head())?;
        let (at, body) = next("tensor values")?;
        let data = body
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| fmt_err(at, format!("tensor {name}: {e}")))?;
        let t = Tensor::new(shape, data).map_err(|e| fmt_err(at, format!("tensor {name}: {e}")))?;
        out.push((name, t));
    }
    Ok(out)
}

pub fn save(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    fs::write(path, encode(tensors)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text)
}
