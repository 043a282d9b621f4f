//! ECG ingestion: numeric text samples plus a TOML sidecar.
//!
//! `rec01.csv` holds samples, one per line or comma separated. Its sidecar
//! `rec01.meta.toml` carries:
//!
//! ```toml
//! subject_id = "p017"
//! gender = "female"
//! age = 24
//! rate = 500
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ecg::SignalRecord;
use crate::error::{Error, Result};
use crate::types::Gender;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub subject_id: String,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    pub rate: u32,
}

pub fn sidecar_path(signal: &Path) -> PathBuf {
    signal.with_extension("meta.toml")
}

/// Parses samples separated by commas, whitespace or newlines.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let mut col = 0;
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()) {
            if !tok.is_empty() {
                let v = tok.parse::<f64>().map_err(|e| Error::Format {
                    offset: offset + col,
                    message: format!("bad sample {tok:?}: {e}"),
                })?;
                out.push(v);
            }
            col += tok.len() + 1;
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn read_record(signal: &Path) -> Result<SignalRecord> {
    let text = fs::read_to_string(signal).map_err(|e| Error::io(signal, e))?;
    let samples = parse_samples(&text)?;
    let meta_path = sidecar_path(signal);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RecordMeta = toml::from_str(&meta_text)
        .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
    SignalRecord::new(samples, meta.rate, meta.subject_id, meta.gender, meta.age)
}

pub fn write_record(signal: &Path, rec: &SignalRecord) -> Result<()> {
    let body: String = rec.samples.iter().map(|v| format!("{v:?}\n")).collect();
    fs::write(signal, body).map_err(|e| Error::io(signal, e))?;
    let meta = RecordMeta {
        subject_id: rec.subject_id.clone(),
        gender: rec.gender,
        age: rec.age,
        rate: rec.rate,
    };
    let meta_path = sidecar_path(signal);
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}
