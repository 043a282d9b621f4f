use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSplit;
use crate::ecg::add_ecg_noise;
use crate::error::{Error, Result};
use crate::fusion::MultimodalSample;
use crate::vision::pepper_noise;

fn default_sigma() -> f64 {
    0.1
}

fn default_finger() -> f64 {
    0.05
}

fn default_face() -> f64 {
    0.97
}

/// Corruption applied to a split: Gaussian noise on ECG values and pepper
/// noise (pixels forced to 0) on images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProtocol {
    #[serde(default = "default_sigma")]
    pub ecg_sigma: f64,
    #[serde(default = "default_finger")]
    pub finger_fraction: f64,
    #[serde(default = "default_face")]
    pub face_fraction: f64,
    /// Leave the training half untouched.
    #[serde(default)]
    pub test_only: bool,
}

impl Default for NoiseProtocol {
    fn default() -> Self {
        Self {
            ecg_sigma: default_sigma(),
            finger_fraction: default_finger(),
            face_fraction: default_face(),
            test_only: false,
        }
    }
}

impl NoiseProtocol {
    pub fn clean() -> Self {
        Self {
            ecg_sigma: 0.0,
            finger_fraction: 0.0,
            face_fraction: 0.0,
            test_only: false,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.ecg_sigma == 0.0 && self.finger_fraction == 0.0 && self.face_fraction == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ecg_sigma >= 0.0 && self.ecg_sigma.is_finite()) {
            return Err(Error::param(format!("ecg_sigma must be >= 0, got {}", self.ecg_sigma)));
        }
        for (name, f) in [("finger_fraction", self.finger_fraction), ("face_fraction", self.face_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::param(format!("{name} must be in [0, 1], got {f}")));
            }
        }
        Ok(())
    }

    fn corrupt(&self, s: &MultimodalSample, seed: u64) -> Result<MultimodalSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = s.clone();
        if let Some(e) = &s.ecg {
            out.ecg = Some(add_ecg_noise(e, self.ecg_sigma, &mut rng)?);
        }
        if let Some(f) = &s.face {
            out.face = Some(pepper_noise(f, self.face_fraction, &mut rng)?);
        }
        if let Some(p) = &s.finger {
            out.finger = Some(pepper_noise(p, self.finger_fraction, &mut rng)?);
        }
        Ok(out)
    }
}

/// Corrupts every sample of both halves (or only the test half when
/// `test_only` is set). Each sample draws from its own seed taken from
/// `rng`, train samples first.
pub fn apply_noise_protocol<R: Rng + ?Sized>(
    split: &DatasetSplit,
    protocol: &NoiseProtocol,
    rng: &mut R,
) -> Result<DatasetSplit> {
    protocol.validate()?;
    let mut out = split.clone();
    let train_seeds: Vec<u64> = (0..split.train.len()).map(|_| rng.random()).collect();
    let test_seeds: Vec<u64> = (0..split.test.len()).map(|_| rng.random()).collect();
    if protocol.is_clean() {
        return Ok(out);
    }
    if !protocol.test_only {
        for (s, &seed) in out.train.iter_mut().zip(&train_seeds) {
            *s = protocol.corrupt(s, seed)?;
        }
    }
    for (s, &seed) in out.test.iter_mut().zip(&test_seeds) {
        *s = protocol.corrupt(s, seed)?;
    }
    Ok(out)
}
