//! Desk-scale synthetic source pools.
//!
//! Every ECG subject gets its own P-R-T beat shape and heart rate, every face
//! identity its own background, skin and hair tones and head geometry, every
//! fingerprint identity an oriented, curved ridge pattern. Per-sample jitter
//! perturbs those parameters. Genders alternate; ECG T-wave amplitude, heart
//! rate, hair length and one face shading component depend on gender so the
//! gender task is learnable. Fingerprints are gender-neutral.
//!
//! Tones matter under heavy pepper noise: the few surviving face pixels
//! still sample the subject's tone histogram.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_virtual_subjects, EcgSource, ImageSource, MatchConfig, SourcePools, VirtualSubject};
use crate::ecg::synth::{render, BeatTemplate, RenderConfig, Wave};
use crate::ecg::{SignalRecord, TARGET_RATE};
use crate::error::{Error, Result};
use crate::types::Gender;
use crate::vision::Image;

/// Spatial frequencies `(u, v)` of the face basis, in cycles per image.
const FACE_BASIS: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Images per face and fingerprint identity.
    pub samples_per_subject: usize,
    pub image_size: usize,
    pub record_seconds: f64,
    /// Relative spread of beat-shape parameters across subjects.
    pub ecg_spread: f64,
    /// Relative per-beat amplitude jitter.
    pub ecg_jitter: f64,
    /// White noise std in the raw record (R amplitude is 1).
    pub ecg_noise: f64,
    pub face_jitter: f64,
    pub finger_jitter: f64,
    /// Strength of the gender-dependent components.
    pub gender_effect: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 20,
            samples_per_subject: 40,
            image_size: 32,
            record_seconds: 20.0,
            ecg_spread: 0.11,
            ecg_jitter: 0.05,
            ecg_noise: 0.02,
            face_jitter: 0.15,
            finger_jitter: 0.3,
            gender_effect: 1.0,
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn gender_of(i: usize) -> Gender {
    if i % 2 == 0 {
        Gender::Male
    } else {
        Gender::Female
    }
}

fn sign(g: Gender) -> f64 {
    if g == Gender::Female {
        1.0
    } else {
        -1.0
    }
}

/// Subject-specific P, R and T waves.
pub fn subject_template<R: Rng + ?Sized>(spread: f64, gender: Gender, gender_effect: f64, rng: &mut R) -> BeatTemplate {
    let mut factor = |rel: f64| 1.0 + rel * spread * normal(&mut *rng);
    let p = Wave {
        amplitude: 0.15 * factor(1.5).max(0.2),
        offset_s: -0.18 * factor(0.5),
        width_s: 0.025 * factor(1.0).max(0.2),
    };
    let r = Wave {
        amplitude: 1.0,
        offset_s: 0.0,
        width_s: 0.012 * factor(1.0).max(0.2),
    };
    let t = Wave {
        amplitude: 0.3 * factor(1.5).max(0.2) - 0.06 * gender_effect * sign(gender),
        offset_s: 0.24 * factor(0.4),
        width_s: 0.04 * factor(1.0).max(0.2),
    };
    BeatTemplate { waves: vec![p, r, t] }
}

/// Cartoon face: background, a skin ellipse and a hair cap, each in its own
/// tone, plus faint low-frequency shading. Long hair runs down the sides of
/// the head.
struct Face {
    /// Background, skin, hair.
    tones: [f64; 3],
    radii: (f64, f64),
    /// Hair covers the head above this height, in face radii from center.
    hairline: f64,
    long_hair: bool,
    shading: Vec<f64>,
    phases: Vec<f64>,
}

fn face_image<R: Rng + ?Sized>(size: usize, face: &Face, rng: &mut R, jitter: f64) -> Image {
    let tones: Vec<f64> = face.tones.iter().map(|t| t + 0.1 * jitter * normal(rng)).collect();
    let shading: Vec<f64> = face.shading.iter().map(|c| c + jitter * normal(rng)).collect();
    let (cx, cy) = (0.5 + 0.04 * jitter * normal(rng), 0.5 + 0.04 * jitter * normal(rng));
    let scale = 1.0 + 0.05 * jitter * normal(rng);
    let (rx, ry) = (face.radii.0 * scale, face.radii.1 * scale);
    let mut px = Vec::with_capacity(size * size);
    for yi in 0..size {
        for xi in 0..size {
            let (x, y) = (xi as f64 / size as f64, yi as f64 / size as f64);
            let (u, v) = ((x - cx) / rx, (y - cy) / ry);
            let in_face = u * u + v * v <= 1.0;
            let in_head = (u / 1.15).powi(2) + (v / 1.15).powi(2) <= 1.0;
            let region = if in_head && (v < face.hairline || (face.long_hair && !in_face && v < 0.6)) {
                2
            } else if in_face {
                1
            } else {
                0
            };
            let mut shade = 0.0;
            for (k, &(fu, fv)) in FACE_BASIS.iter().enumerate().skip(1) {
                shade += shading[k] * (2.0 * PI * (fu * x + fv * y) + face.phases[k]).cos();
            }
            px.push((tones[region] + 0.01 * shade).clamp(0.0, 1.0));
        }
    }
    Image::new(size, size, px).expect("clamped pixels")
}

struct Ridge {
    theta: f64,
    freq: f64,
    curvature: f64,
}

fn finger_image<R: Rng + ?Sized>(size: usize, ridge: &Ridge, rng: &mut R, jitter: f64) -> Image {
    let theta = ridge.theta + 0.25 * jitter * normal(rng);
    let freq = ridge.freq * (1.0 + 0.08 * jitter * normal(rng));
    let curvature = ridge.curvature + jitter * normal(rng);
    let phase = rng.random_range(0.0..2.0 * PI);
    let (s, c) = theta.sin_cos();
    let mut px = Vec::with_capacity(size * size);
    for yi in 0..size {
        for xi in 0..size {
            let (x, y) = (xi as f64 / size as f64 - 0.5, yi as f64 / size as f64 - 0.5);
            let along = x * c + y * s;
            let r2 = x * x + y * y;
            px.push(0.5 + 0.4 * (2.0 * PI * freq * along + curvature * r2 * 2.0 * PI + phase).cos());
        }
    }
    Image::new(size, size, px).expect("pixels in range")
}

/// Generates independent ECG, face and fingerprint pools with `n_subjects`
/// identities each, plus face gender annotations.
pub fn synth_sources<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<SourcePools> {
    if cfg.n_subjects < 2 {
        return Err(Error::Config(format!("n_subjects must be >= 2, got {}", cfg.n_subjects)));
    }
    if cfg.samples_per_subject == 0 || cfg.image_size < 2 {
        return Err(Error::Config("samples_per_subject and image_size must be positive".into()));
    }
    let n = cfg.n_subjects;
    let mut pools = SourcePools::default();
    for i in 0..n {
        let gender = gender_of(i);
        let template = subject_template(cfg.ecg_spread, gender, cfg.gender_effect, rng);
        let render_cfg = RenderConfig {
            rate: TARGET_RATE,
            duration_s: cfg.record_seconds,
            bpm: 62.0 + 20.0 * rng.random::<f64>() + 6.0 * cfg.gender_effect * sign(gender),
            rr_jitter: 0.03,
            amplitude_jitter: cfg.ecg_jitter,
            noise_std: cfg.ecg_noise,
            first_beat_s: 0.4 + 0.3 * rng.random::<f64>(),
        };
        let (samples, _) = render(&template, &render_cfg, rng);
        let id = format!("e{i:03}");
        let age = rng.random_range(18..=35);
        pools.ecg.push(EcgSource {
            records: vec![SignalRecord::new(samples, TARGET_RATE, id.clone(), gender, Some(age))?],
            id,
            gender,
            age: Some(age),
        });
    }
    let mut genders = BTreeMap::new();
    for i in 0..n {
        let gender = gender_of(i);
        let mut shading: Vec<f64> = (0..FACE_BASIS.len()).map(|_| normal(rng)).collect();
        shading[2] += cfg.gender_effect * sign(gender);
        let face = Face {
            tones: [
                rng.random_range(0.1..0.9),
                rng.random_range(0.25..0.95),
                rng.random_range(0.05..0.7),
            ],
            radii: (rng.random_range(0.25..0.35), rng.random_range(0.32..0.42)),
            hairline: rng.random_range(-0.7..-0.3),
            long_hair: gender == Gender::Female && cfg.gender_effect > 0.0,
            shading,
            phases: (0..FACE_BASIS.len()).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        };
        let images = (0..cfg.samples_per_subject)
            .map(|_| face_image(cfg.image_size, &face, rng, cfg.face_jitter))
            .collect();
        let id = format!("f{i:03}");
        genders.insert(id.clone(), gender);
        pools.faces.push(ImageSource { id, images });
    }
    pools.face_genders = genders;
    for i in 0..n {
        let ridge = Ridge {
            theta: rng.random_range(0.0..PI),
            freq: rng.random_range(2.0..4.5),
            curvature: rng.random_range(-2.0..2.0),
        };
        let images = (0..cfg.samples_per_subject)
            .map(|_| finger_image(cfg.image_size, &ridge, rng, cfg.finger_jitter))
            .collect();
        pools.fingers.push(ImageSource {
            id: format!("p{i:03}"),
            images,
        });
    }
    Ok(pools)
}

/// Synthetic pools paired into `n_subjects` virtual subjects.
pub fn synth_generate<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Vec<VirtualSubject>> {
    let pools = synth_sources(cfg, rng)?;
    let matching = MatchConfig {
        target: Some(cfg.n_subjects),
        ..MatchConfig::default()
    };
    build_virtual_subjects(&pools, &matching, rng)
}
