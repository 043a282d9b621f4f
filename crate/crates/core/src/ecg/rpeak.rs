//! Pan-Tompkins style R-peak detection at 500 Hz.
//!
//! Chain: short moving average, centered difference, squaring, 150 ms
//! moving-window integration. Envelope maxima above half the rolling maximum
//! are beat candidates; candidates closer than the 200 ms refractory period
//! keep the stronger one. Each surviving candidate is then snapped to the
//! apex of the baseline-corrected signal nearby, which is what the QRS
//! window is centered on. All filters are zero-phase so the envelope lobe
//! stays aligned with the complex.

use std::collections::VecDeque;

use crate::ecg::{SignalRecord, TARGET_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RPeakConfig {
    /// Low-pass moving-average width (samples).
    pub smooth: usize,
    /// Half-span of the centered difference (samples).
    pub diff_span: usize,
    /// Integration window (samples); 75 = 150 ms.
    pub integration: usize,
    /// Rolling-max window for the adaptive threshold (samples).
    pub threshold_window: usize,
    /// Threshold as a fraction of the rolling max.
    pub threshold_ratio: f64,
    /// Candidates below this fraction of the global envelope max are noise.
    pub floor_ratio: f64,
    /// Minimum spacing between accepted peaks (samples); 100 = 200 ms.
    pub refractory: usize,
    /// Search radius for snapping to the signal apex (samples).
    pub snap_radius: usize,
    /// Baseline moving-average width used before snapping (samples).
    pub baseline: usize,
}

impl Default for RPeakConfig {
    fn default() -> Self {
        Self {
            smooth: 5,
            diff_span: 2,
            integration: 75,
            threshold_window: 1000,
            threshold_ratio: 0.5,
            floor_ratio: 0.01,
            refractory: 100,
            snap_radius: 25,
            baseline: 301,
        }
    }
}

/// R-peak sample indices of a 500 Hz record, strictly increasing and at
/// least the refractory period apart.
pub fn detect_r_peaks(rec: &SignalRecord) -> Result<Vec<usize>> {
    detect_r_peaks_with(rec, &RPeakConfig::default())
}

pub fn detect_r_peaks_with(rec: &SignalRecord, cfg: &RPeakConfig) -> Result<Vec<usize>> {
    if rec.rate != TARGET_RATE {
        return Err(Error::param(format!(
            "R-peak detection expects {TARGET_RATE} Hz, record is {} Hz",
            rec.rate
        )));
    }
    let x = &rec.samples;
    if x.len() < rec.rate as usize {
        return Err(Error::InsufficientSignal(format!(
            "{} samples is shorter than 1 s",
            x.len()
        )));
    }
    let env = envelope(x, cfg);
    let global_max = env.iter().cloned().fold(0.0, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = cfg.floor_ratio * global_max;
    let rolling = rolling_max(&env, cfg.threshold_window);

    let mut accepted: Vec<usize> = Vec::new();
    for i in local_maxima(&env) {
        if env[i] <= floor || env[i] < cfg.threshold_ratio * rolling[i] {
            continue;
        }
        match accepted.last_mut() {
            Some(last) if i - *last < cfg.refractory => {
                if env[i] > env[*last] {
                    *last = i;
                }
            }
            _ => accepted.push(i),
        }
    }

    let corrected = baseline_corrected(x, cfg.baseline);
    let mut peaks: Vec<usize> = Vec::with_capacity(accepted.len());
    for c in accepted {
        let lo = c.saturating_sub(cfg.snap_radius);
        let hi = (c + cfg.snap_radius + 1).min(x.len());
        let apex = (lo..hi)
            .max_by(|&a, &b| {
                corrected[a]
                    .partial_cmp(&corrected[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap_or(c);
        match peaks.last_mut() {
            Some(last) if apex <= *last || apex - *last < cfg.refractory => {
                if corrected[apex] > corrected[*last] {
                    *last = apex;
                }
            }
            _ => peaks.push(apex),
        }
    }
    Ok(peaks)
}

fn envelope(x: &[f64], cfg: &RPeakConfig) -> Vec<f64> {
    let smoothed = moving_average(x, cfg.smooth);
    let n = x.len();
    let k = cfg.diff_span;
    let squared: Vec<f64> = (0..n)
        .map(|i| {
            let a = smoothed[(i + k).min(n - 1)];
            let b = smoothed[i.saturating_sub(k)];
            (a - b) * (a - b)
        })
        .collect();
    moving_average(&squared, cfg.integration)
}

/// Centered moving average; the window shrinks at the edges.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn baseline_corrected(x: &[f64], width: usize) -> Vec<f64> {
    let base = moving_average(x, width);
    x.iter().zip(base).map(|(v, b)| v - b).collect()
}

/// Centered sliding-window maximum via a monotonic deque.
fn rolling_max(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut out = vec![0.0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let hi = (i + half + 1).min(n);
        while next < hi {
            while dq.back().is_some_and(|&j| x[j] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while dq.front().is_some_and(|&j| j < lo) {
            dq.pop_front();
        }
        *slot = x[*dq.front().unwrap()];
    }
    out
}

/// Indices where the sequence peaks; plateaus report their first sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gender;

    fn rec(samples: Vec<f64>) -> SignalRecord {
        SignalRecord::new(samples, 500, "t", Gender::Unknown, None).unwrap()
    }

    fn gaussian_train(centers: &[usize], n: usize, width: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                centers
                    .iter()
                    .map(|&c| (-((i as f64 - c as f64) / width).powi(2) / 2.0).exp())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn finds_gaussian_beats() {
        let x = gaussian_train(&[500, 1000, 1500], 2000, 8.0);
        // Oracle: argmax inside each known beat window.
        let truth: Vec<usize> = [(250, 750), (750, 1250), (1250, 1750)]
            .iter()
            .map(|&(a, b)| (a..b).max_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap()).unwrap())
            .collect();
        let peaks = detect_r_peaks(&rec(x)).unwrap();
        assert_eq!(peaks.len(), 3, "{peaks:?}");
        for (p, t) in peaks.iter().zip(&truth) {
            assert!(p.abs_diff(*t) <= 5, "{p} vs {t}");
        }
    }

    #[test]
    fn flat_signal_has_no_peaks() {
        assert!(detect_r_peaks(&rec(vec![0.0; 1500])).unwrap().is_empty());
    }

    #[test]
    fn single_bump_at_apex() {
        let x = gaussian_train(&[750], 1500, 6.0);
        let apex = (0..x.len()).max_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap()).unwrap();
        let peaks = detect_r_peaks(&rec(x)).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!(peaks[0].abs_diff(apex) <= 2);
    }

    #[test]
    fn short_record_rejected() {
        assert!(matches!(
            detect_r_peaks(&rec(vec![0.0; 499])),
            Err(Error::InsufficientSignal(_))
        ));
    }

    #[test]
    fn wrong_rate_rejected() {
        let r = SignalRecord::new(vec![0.0; 2000], 1000, "t", Gender::Unknown, None).unwrap();
        assert!(detect_r_peaks(&r).is_err());
    }

    #[test]
    fn rolling_max_matches_brute_force() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 23) as f64).collect();
        let fast = rolling_max(&x, 15);
        for i in 0..x.len() {
            let lo = i.saturating_sub(7);
            let hi = (i + 8).min(x.len());
            let m = x[lo..hi].iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(fast[i], m);
        }
    }
}
