use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ecg::{detect_r_peaks, resample, SignalRecord, QRS_LEN, R_OFFSET, SEQ_LEN, TARGET_RATE};
use crate::error::{Error, Result};

/// A 300-sample window centered on an R peak.
#[derive(Debug, Clone, PartialEq)]
pub struct QrsComplex {
    pub values: Vec<f64>,
    pub r_index_in_source: usize,
}

impl QrsComplex {
    /// Min-max scaled copy.
    pub fn normalized(&self) -> QrsComplex {
        QrsComplex {
            values: minmax_normalize(&self.values),
            r_index_in_source: self.r_index_in_source,
        }
    }
}

/// Three complexes from one record, kept in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgSequence {
    pub complexes: [QrsComplex; SEQ_LEN],
}

impl EcgSequence {
    pub fn to_input(&self) -> EcgInput {
        let mut values = Vec::with_capacity(SEQ_LEN * QRS_LEN);
        for c in &self.complexes {
            values.extend_from_slice(&c.values);
        }
        EcgInput { values }
    }
}

/// Model-ready `3 × 300` ECG matrix, row-major. Unlike [`QrsComplex`],
/// values may leave `[0, 1]` once noise has been added.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgInput {
    pub values: Vec<f64>,
}

impl EcgInput {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != SEQ_LEN * QRS_LEN {
            return Err(Error::dim(format!(
                "ECG input needs {} values, got {}",
                SEQ_LEN * QRS_LEN,
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; SEQ_LEN * QRS_LEN],
        }
    }
}

/// Raw samples `[r - 150, r + 150)`.
pub fn extract_qrs(rec: &SignalRecord, r: usize) -> Result<QrsComplex> {
    let start = r as i64 - R_OFFSET as i64;
    let end = start + QRS_LEN as i64;
    if start < 0 || end > rec.samples.len() as i64 {
        return Err(Error::Boundary {
            start,
            end,
            len: rec.samples.len(),
        });
    }
    Ok(QrsComplex {
        values: rec.samples[start as usize..end as usize].to_vec(),
        r_index_in_source: r,
    })
}

/// `(v - min) / (max - min)`; a constant input maps to all zeros.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Resamples to 500 Hz when needed, detects R peaks and returns every
/// in-bounds complex, min-max normalized.
pub fn segment_record(rec: &SignalRecord) -> Result<Vec<QrsComplex>> {
    let rec = if rec.rate == TARGET_RATE {
        rec.clone()
    } else {
        resample(rec, TARGET_RATE)?
    };
    let peaks = detect_r_peaks(&rec)?;
    Ok(peaks
        .into_iter()
        .filter_map(|r| extract_qrs(&rec, r).ok())
        .map(|q| q.normalized())
        .collect())
}

/// Draws three distinct complexes and keeps them in pool order.
pub fn group_sequence<R: Rng + ?Sized>(pool: &[QrsComplex], rng: &mut R) -> Result<EcgSequence> {
    if pool.len() < SEQ_LEN {
        return Err(Error::InsufficientComplexes(pool.len()));
    }
    let mut idx = sample(rng, pool.len(), SEQ_LEN).into_vec();
    idx.sort_unstable();
    Ok(EcgSequence {
        complexes: [pool[idx[0]].clone(), pool[idx[1]].clone(), pool[idx[2]].clone()],
    })
}

/// Adds i.i.d. `N(0, sigma²)` to every value, without clamping.
pub fn add_ecg_noise<R: Rng + ?Sized>(input: &EcgInput, sigma: f64, rng: &mut R) -> Result<EcgInput> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(input.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    Ok(EcgInput {
        values: input.values.iter().map(|v| v + normal.sample(rng)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gender;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(samples: Vec<f64>) -> SignalRecord {
        SignalRecord::new(samples, 500, "t", Gender::Male, None).unwrap()
    }

    fn complex(tag: f64) -> QrsComplex {
        QrsComplex {
            values: vec![tag; QRS_LEN],
            r_index_in_source: tag as usize,
        }
    }

    #[test]
    fn window_at_left_boundary() {
        let samples: Vec<f64> = (0..400).map(f64::from).collect();
        let q = extract_qrs(&rec(samples.clone()), 150).unwrap();
        assert_eq!(q.values, samples[..300].to_vec());
    }

    #[test]
    fn window_out_of_bounds() {
        assert!(matches!(
            extract_qrs(&rec(vec![0.0; 400]), 100),
            Err(Error::Boundary { start: -50, .. })
        ));
        assert!(extract_qrs(&rec(vec![0.0; 400]), 251).is_err());
        assert!(extract_qrs(&rec(vec![0.0; 400]), 250).is_ok());
    }

    #[test]
    fn impulse_lands_at_offset_150() {
        let mut s = vec![0.0; 1000];
        s[420] = 1.0;
        let q = extract_qrs(&rec(s), 420).unwrap();
        assert_eq!(q.values.len(), 300);
        assert_eq!(q.values[150], 1.0);
        assert_eq!(q.values.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[5.0, 5.0, 5.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn minmax_keeps_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = minmax_normalize(&v);
        assert_eq!(out.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(out.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        for i in 0..300 {
            for j in 0..300 {
                assert_eq!(v[i] < v[j], out[i] < out[j]);
            }
        }
    }

    #[test]
    fn exact_pool_of_three() {
        let pool = vec![complex(1.0), complex(2.0), complex(3.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seq = group_sequence(&pool, &mut rng).unwrap();
        assert_eq!(seq.complexes.to_vec(), pool);
    }

    #[test]
    fn grouping_is_ordered_and_seeded() {
        let pool: Vec<_> = (0..15).map(|i| complex(i as f64)).collect();
        let a = group_sequence(&pool, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = group_sequence(&pool, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let ids: Vec<usize> = a.complexes.iter().map(|c| c.r_index_in_source).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_pool_rejected() {
        let pool = vec![complex(1.0), complex(2.0)];
        assert!(matches!(
            group_sequence(&pool, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InsufficientComplexes(2))
        ));
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let x = EcgInput::zeros();
        let y = add_ecg_noise(&x, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(x, y);
        assert!(add_ecg_noise(&x, -0.1, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn noise_std_and_determinism() {
        let x = EcgInput::zeros();
        let y = add_ecg_noise(&x, 0.1, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let z = add_ecg_noise(&x, 0.1, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(y, z);
        let n = y.values.len() as f64;
        let mean = y.values.iter().sum::<f64>() / n;
        let std = (y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.08..=0.12).contains(&std), "{std}");
    }
}
