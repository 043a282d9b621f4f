//! Synthetic single-lead ECG: a beat template of Gaussian waves repeated at
//! a (jittered) heart rate, plus white noise.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

/// One Gaussian deflection, positioned relative to the R peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub offset_s: f64,
    pub width_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatTemplate {
    pub waves: Vec<Wave>,
}

impl BeatTemplate {
    /// A textbook P-QRS-T shape with unit R amplitude.
    pub fn standard() -> Self {
        let w = |amplitude, offset_s, width_s| Wave {
            amplitude,
            offset_s,
            width_s,
        };
        Self {
            waves: vec![
                w(0.15, -0.18, 0.025),
                w(-0.12, -0.025, 0.008),
                w(1.0, 0.0, 0.010),
                w(-0.2, 0.025, 0.009),
                w(0.3, 0.25, 0.04),
            ],
        }
    }

    pub fn value_at(&self, dt: f64) -> f64 {
        self.waves
            .iter()
            .map(|w| w.amplitude * (-0.5 * ((dt - w.offset_s) / w.width_s).powi(2)).exp())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub rate: u32,
    pub duration_s: f64,
    pub bpm: f64,
    /// Relative std of each RR interval.
    pub rr_jitter: f64,
    /// Relative std of each wave amplitude, drawn per beat.
    pub amplitude_jitter: f64,
    /// Additive white noise std.
    pub noise_std: f64,
    /// Time of the first R peak.
    pub first_beat_s: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            rate: 500,
            duration_s: 20.0,
            bpm: 70.0,
            rr_jitter: 0.03,
            amplitude_jitter: 0.0,
            noise_std: 0.0,
            first_beat_s: 0.5,
        }
    }
}

/// Renders a record; returns the samples and the true R-peak indices.
pub fn render<R: Rng + ?Sized>(
    template: &BeatTemplate,
    cfg: &RenderConfig,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let n = (cfg.duration_s * cfg.rate as f64).round() as usize;
    let rate = cfg.rate as f64;
    let mut signal = vec![0.0; n];
    let mut r_peaks = Vec::new();
    let mean_rr = 60.0 / cfg.bpm;
    let mut t = cfg.first_beat_s;
    while t < cfg.duration_s {
        let beat = BeatTemplate {
            waves: template
                .waves
                .iter()
                .map(|w| {
                    let z: f64 = StandardNormal.sample(rng);
                    Wave {
                        amplitude: w.amplitude * (1.0 + cfg.amplitude_jitter * z),
                        ..*w
                    }
                })
                .collect(),
        };
        let center = (t * rate).round() as usize;
        if center < n {
            r_peaks.push(center);
        }
        let lo = ((t - 0.4) * rate).max(0.0) as usize;
        let hi = (((t + 0.6) * rate) as usize).min(n);
        for (i, s) in signal.iter_mut().enumerate().take(hi).skip(lo) {
            *s += beat.value_at(i as f64 / rate - t);
        }
        let z: f64 = StandardNormal.sample(rng);
        t += mean_rr * (1.0 + cfg.rr_jitter * z).max(0.5);
    }
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).expect("finite noise std");
        signal.iter_mut().for_each(|s| *s += normal.sample(rng));
    }
    (signal, r_peaks)
}

/// Mean power of a signal, used for SNR bookkeeping.
pub fn mean_power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn template_peaks_at_r() {
        let t = BeatTemplate::standard();
        assert!((t.value_at(0.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn beat_count_follows_rate() {
        let cfg = RenderConfig {
            rr_jitter: 0.0,
            bpm: 60.0,
            duration_s: 10.0,
            ..RenderConfig::default()
        };
        let (sig, peaks) = render(&BeatTemplate::standard(), &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(sig.len(), 5000);
        assert_eq!(peaks.len(), 10);
        assert_eq!(peaks[1] - peaks[0], 500);
    }
}
