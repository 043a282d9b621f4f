use crate::ecg::SignalRecord;
use crate::error::{Error, Result};

/// Linear-interpolation resampling to `target_rate`.
///
/// Output sample `i` sits at source position `i · rate / target_rate`; the
/// output length is `round(len · target_rate / rate)`.
pub fn resample(rec: &SignalRecord, target_rate: u32) -> Result<SignalRecord> {
    if target_rate == 0 {
        return Err(Error::param("target rate must be positive"));
    }
    if target_rate == rec.rate {
        return Ok(rec.clone());
    }
    let n = rec.samples.len();
    let out_len = ((n as f64) * target_rate as f64 / rec.rate as f64).round() as usize;
    let step = rec.rate as f64 / target_rate as f64;
    let last = n - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let i0 = pos.floor() as usize;
            if i0 >= last {
                return rec.samples[last];
            }
            let frac = pos - i0 as f64;
            rec.samples[i0] * (1.0 - frac) + rec.samples[i0 + 1] * frac
        })
        .collect();
    SignalRecord::new(
        samples,
        target_rate,
        rec.subject_id.clone(),
        rec.gender,
        rec.age,
    )
}
