use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Provenance, SourcePools, VirtualSubject};
use crate::ecg::segment_record;
use crate::error::{Error, Result};
use crate::types::Gender;

fn default_age_min() -> u32 {
    13
}

fn default_age_max() -> u32 {
    39
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    /// Inclusive age band an ECG subject must fall into.
    #[serde(default = "default_age_min")]
    pub age_min: u32,
    #[serde(default = "default_age_max")]
    pub age_max: u32,
    /// Number of virtual subjects to build; `None` pairs every face identity.
    #[serde(default)]
    pub target: Option<usize>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            age_min: default_age_min(),
            age_max: default_age_max(),
            target: None,
        }
    }
}

/// Pairs face identities (in random order) with an unused ECG subject of the
/// annotated gender inside the age band, and an unused fingerprint identity
/// drawn uniformly. ECG records are segmented for the chosen subjects only;
/// records that fail segmentation contribute an empty complex list.
pub fn build_virtual_subjects<R: Rng + ?Sized>(
    pools: &SourcePools,
    cfg: &MatchConfig,
    rng: &mut R,
) -> Result<Vec<VirtualSubject>> {
    if cfg.age_min > cfg.age_max {
        return Err(Error::Config(format!(
            "age band [{}, {}] is empty",
            cfg.age_min, cfg.age_max
        )));
    }
    let mut face_order: Vec<usize> = (0..pools.faces.len()).collect();
    face_order.shuffle(rng);
    let mut ecg_used = vec![false; pools.ecg.len()];
    let mut finger_used = vec![false; pools.fingers.len()];
    let mut subjects = Vec::new();
    let mut unmatched = Vec::new();
    let target = cfg.target.unwrap_or(pools.faces.len());

    for fi in face_order {
        if subjects.len() == target {
            break;
        }
        let face = &pools.faces[fi];
        let gender = *pools.face_genders.get(&face.id).ok_or_else(|| {
            Error::Construction(format!("face identity {} has no gender annotation", face.id))
        })?;
        let candidates: Vec<usize> = (0..pools.ecg.len())
            .filter(|&e| {
                let src = &pools.ecg[e];
                !ecg_used[e]
                    && gender != Gender::Unknown
                    && src.gender == gender
                    && src.age.is_some_and(|a| (cfg.age_min..=cfg.age_max).contains(&a))
            })
            .collect();
        let fingers: Vec<usize> = (0..pools.fingers.len()).filter(|&p| !finger_used[p]).collect();
        if candidates.is_empty() || fingers.is_empty() {
            unmatched.push(face.id.clone());
            continue;
        }
        let e = candidates[rng.random_range(0..candidates.len())];
        let p = fingers[rng.random_range(0..fingers.len())];
        ecg_used[e] = true;
        finger_used[p] = true;
        let ecg = &pools.ecg[e];
        let ecg_pool = ecg
            .records
            .iter()
            .map(|r| segment_record(r).unwrap_or_default())
            .collect();
        subjects.push(VirtualSubject {
            id: subjects.len(),
            gender,
            ecg_pool,
            face_pool: face.images.clone(),
            finger_pool: pools.fingers[p].images.clone(),
            provenance: Provenance {
                ecg: ecg.id.clone(),
                face: face.id.clone(),
                finger: pools.fingers[p].id.clone(),
            },
        });
    }
    if subjects.len() < target {
        return Err(Error::Construction(format!(
            "built {} of {target} virtual subjects; unmatched face identities: {}",
            subjects.len(),
            unmatched.join(", ")
        )));
    }
    Ok(subjects)
}
