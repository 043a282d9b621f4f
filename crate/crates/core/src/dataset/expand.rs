use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::VirtualSubject;
use crate::ecg::{EcgInput, SEQ_LEN};
use crate::error::{Error, Result};
use crate::fusion::MultimodalSample;
use crate::vision::{augment, AugmentParams, Image};

/// Three complexes (indices into one record's pool, ascending).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcgDraw {
    pub record: usize,
    pub complexes: [usize; SEQ_LEN],
}

/// A source image and the seed of the augmentation applied to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDraw {
    pub source: usize,
    pub seed: u64,
}

fn default_target() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    /// Samples wanted per modality per subject.
    #[serde(default = "default_target")]
    pub target: usize,
    #[serde(default)]
    pub augment: AugmentParams,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self {
            target: default_target(),
            augment: AugmentParams::default(),
        }
    }
}

/// Derivation records for one subject's samples. Sample `k` combines
/// `ecg[k]`, `face[k]` and `finger[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedPools {
    pub subject: usize,
    pub ecg: Vec<EcgDraw>,
    pub face: Vec<ImageDraw>,
    pub finger: Vec<ImageDraw>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ExpandedPools {
    pub fn sample_count(&self) -> usize {
        self.ecg.len().min(self.face.len()).min(self.finger.len())
    }
}

/// All ascending index triples of `0..n` in lexicographic order.
pub fn enumerate_triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn image_draws<R: Rng + ?Sized>(pool_len: usize, target: usize, rng: &mut R) -> Vec<ImageDraw> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let seed: u64 = rng.random();
        if seen.insert(seed) {
            out.push(ImageDraw {
                source: out.len() % pool_len,
                seed,
            });
        }
    }
    out
}

/// Draws up to `cfg.target` ECG triples (every triple when fewer exist) and
/// exactly `cfg.target` augmented image derivations per image modality.
pub fn expand_samples<R: Rng + ?Sized>(
    subject: &VirtualSubject,
    cfg: &ExpandConfig,
    rng: &mut R,
) -> Result<ExpandedPools> {
    cfg.augment.validate()?;
    if subject.face_pool.is_empty() || subject.finger_pool.is_empty() {
        return Err(Error::Construction(format!(
            "subject {} has an empty image pool",
            subject.id
        )));
    }
    let mut warnings = Vec::new();
    let mut all = Vec::new();
    for (record, pool) in subject.ecg_pool.iter().enumerate() {
        if pool.len() < SEQ_LEN {
            warnings.push(format!(
                "subject {} record {record}: {} complexes, skipped",
                subject.id,
                pool.len()
            ));
            continue;
        }
        all.extend(
            enumerate_triples(pool.len())
                .into_iter()
                .map(|complexes| EcgDraw { record, complexes }),
        );
    }
    if all.is_empty() {
        let best = subject.ecg_pool.iter().map(Vec::len).max().unwrap_or(0);
        return Err(Error::InsufficientComplexes(best));
    }
    let ecg: Vec<EcgDraw> = if all.len() > cfg.target {
        sample(rng, all.len(), cfg.target).into_iter().map(|i| all[i]).collect()
    } else {
        all.shuffle(rng);
        all
    };
    let face = image_draws(subject.face_pool.len(), cfg.target, rng);
    let finger = image_draws(subject.finger_pool.len(), cfg.target, rng);
    Ok(ExpandedPools {
        subject: subject.id,
        ecg,
        face,
        finger,
        warnings,
    })
}

fn realize_image(pool: &[Image], draw: &ImageDraw, params: &AugmentParams) -> Result<Image> {
    let src = pool.get(draw.source).ok_or_else(|| {
        Error::Construction(format!("image draw references missing source {}", draw.source))
    })?;
    augment(src, params, &mut ChaCha8Rng::seed_from_u64(draw.seed))
}

/// Materializes every sample the derivations describe.
pub fn realize_samples(
    subject: &VirtualSubject,
    pools: &ExpandedPools,
    params: &AugmentParams,
) -> Result<Vec<MultimodalSample>> {
    let gender = subject.gender.label().ok_or_else(|| {
        Error::Construction(format!("subject {} has unknown gender", subject.id))
    })?;
    (0..pools.sample_count())
        .map(|k| {
            let draw = pools.ecg[k];
            let record = &subject.ecg_pool[draw.record];
            let mut values = Vec::new();
            for &c in &draw.complexes {
                values.extend_from_slice(&record[c].values);
            }
            let face = realize_image(&subject.face_pool, &pools.face[k], params)?;
            let finger = realize_image(&subject.finger_pool, &pools.finger[k], params)?;
            MultimodalSample::new(
                Some(EcgInput::new(values)?),
                Some(face),
                Some(finger),
                subject.id,
                gender,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use crate::ecg::{QrsComplex, QRS_LEN};
    use crate::types::Gender;

    fn subject(complexes: &[usize], images: usize) -> VirtualSubject {
        VirtualSubject {
            id: 0,
            gender: Gender::Female,
            ecg_pool: complexes
                .iter()
                .map(|&n| {
                    (0..n)
                        .map(|i| QrsComplex {
                            values: vec![i as f64 / 100.0; QRS_LEN],
                            r_index_in_source: i,
                        })
                        .collect()
                })
                .collect(),
            face_pool: (0..images).map(|i| Image::filled(4, 4, i as f64 / 10.0)).collect(),
            finger_pool: vec![Image::filled(4, 4, 0.3)],
            provenance: Provenance {
                ecg: "e".into(),
                face: "f".into(),
                finger: "p".into(),
            },
        }
    }

    #[test]
    fn fifteen_choose_three() {
        let t = enumerate_triples(15);
        assert_eq!(t.len(), 455);
        assert!(t.iter().all(|x| x[0] < x[1] && x[1] < x[2]));
        let mut d = t.clone();
        d.dedup();
        assert_eq!(d.len(), 455);
    }

    #[test]
    fn single_image_gets_distinct_seeds() {
        let s = subject(&[15], 1);
        let cfg = ExpandConfig::default();
        let p = expand_samples(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.face.len(), 400);
        let seeds: BTreeSet<u64> = p.face.iter().map(|d| d.seed).collect();
        assert_eq!(seeds.len(), 400);
        assert!(p.face.iter().all(|d| d.source == 0));
        assert_eq!(p.ecg.len(), 400);
        assert_eq!(p.sample_count(), 400);
    }

    #[test]
    fn short_records_skipped_with_warning() {
        let s = subject(&[2, 5], 2);
        let cfg = ExpandConfig {
            target: 50,
            ..ExpandConfig::default()
        };
        let p = expand_samples(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.ecg.len(), 10);
        assert!(p.ecg.iter().all(|d| d.record == 1));
        assert_eq!(p.warnings.len(), 1);
        assert!(matches!(
            expand_samples(&subject(&[2], 1), &cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InsufficientComplexes(2))
        ));
    }

    #[test]
    fn realization_is_deterministic() {
        let s = subject(&[6], 3);
        let cfg = ExpandConfig {
            target: 12,
            ..ExpandConfig::default()
        };
        let p1 = expand_samples(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let p2 = expand_samples(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(p1, p2);
        let a = realize_samples(&s, &p1, &cfg.augment).unwrap();
        let b = realize_samples(&s, &p2, &cfg.augment).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|x| x.gender_label == 1 && x.ecg.as_ref().unwrap().values.len() == 900));
    }
}
