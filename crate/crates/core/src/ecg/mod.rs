//! ECG preprocessing: raw recordings to 3×300 normalized QRS sequences.

pub mod io;
mod resample;
mod rpeak;
mod segment;
pub mod synth;

pub use resample::resample;
pub use rpeak::{detect_r_peaks, RPeakConfig};
pub use segment::{
    add_ecg_noise, extract_qrs, group_sequence, minmax_normalize, segment_record, EcgInput,
    EcgSequence, QrsComplex,
};

use crate::error::{Error, Result};
use crate::types::Gender;

/// Sampling rate every downstream stage assumes.
pub const TARGET_RATE: u32 = 500;
/// Samples per QRS window.
pub const QRS_LEN: usize = 300;
/// Offset of the R peak inside a QRS window.
pub const R_OFFSET: usize = QRS_LEN / 2;
/// Complexes grouped into one model input.
pub const SEQ_LEN: usize = 3;

/// One single-lead ECG recording with its subject metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub samples: Vec<f64>,
    pub rate: u32,
    pub subject_id: String,
    pub gender: Gender,
    pub age: Option<u32>,
}

impl SignalRecord {
    pub fn new(
        samples: Vec<f64>,
        rate: u32,
        subject_id: impl Into<String>,
        gender: Gender,
        age: Option<u32>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSignal(format!(
                "record has {} samples, need at least 2",
                samples.len()
            )));
        }
        if rate == 0 {
            return Err(Error::param("sampling rate must be positive"));
        }
        Ok(Self {
            samples,
            rate,
            subject_id: subject_id.into(),
            gender,
            age,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}
