use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_virtual_subjects, expand_samples, load_sources, make_split, realize_samples,
    synth_generate, DatasetSplit, ExpandConfig, ExpandedPools, MatchConfig, Provenance, SampleKey,
    SynthConfig, VirtualSubject,
};
use crate::error::{Error, Result};
use crate::types::Gender;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    /// Root of a source tree in the [`load_sources`] layout.
    Ingested { root: PathBuf },
}

fn default_ratio() -> f64 {
    0.8
}

fn default_image_size() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    #[serde(default)]
    pub matching: MatchConfig,
    #[serde(default)]
    pub expand: ExpandConfig,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    /// Side length images are standardized to (synthetic images are drawn
    /// at this size directly).
    #[serde(default = "default_image_size")]
    pub image_size: usize,
}

impl DatasetConfig {
    pub fn synthetic(synth: SynthConfig) -> Self {
        Self {
            image_size: synth.image_size,
            expand: ExpandConfig {
                target: synth.samples_per_subject,
                ..ExpandConfig::default()
            },
            source: DataSource::Synthetic(synth),
            matching: MatchConfig::default(),
            split_ratio: default_ratio(),
        }
    }
}

/// Subjects, their derivation records and the clean train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub seed: u64,
    pub subjects: Vec<VirtualSubject>,
    pub pools: Vec<ExpandedPools>,
    pub split: DatasetSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: usize,
    pub gender: Gender,
    pub provenance: Provenance,
    pub expansion: ExpandedPools,
}

/// Everything needed to rebuild a dataset from its sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config: DatasetConfig,
    pub subjects: Vec<SubjectEntry>,
    pub train: Vec<SampleKey>,
    pub test: Vec<SampleKey>,
}

/// Builds subjects, expands and realizes their samples and splits them.
/// A pure function of `(cfg, seed)` and the source files.
pub fn build_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = match &cfg.source {
        DataSource::Synthetic(synth) => {
            let synth = SynthConfig {
                image_size: cfg.image_size,
                ..synth.clone()
            };
            synth_generate(&synth, &mut rng)?
        }
        DataSource::Ingested { root } => {
            let pools = load_sources(root, cfg.image_size, cfg.image_size)?;
            build_virtual_subjects(&pools, &cfg.matching, &mut rng)?
        }
    };
    if subjects.len() < 2 {
        return Err(Error::Construction(format!(
            "need at least 2 virtual subjects, built {}",
            subjects.len()
        )));
    }
    let mut pools = Vec::with_capacity(subjects.len());
    let mut per_subject = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let mut sub_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let p = expand_samples(s, &cfg.expand, &mut sub_rng)?;
        per_subject.push(realize_samples(s, &p, &cfg.expand.augment)?);
        pools.push(p);
    }
    let split = make_split(per_subject, cfg.split_ratio, &mut rng)?;
    Ok(Dataset {
        seed,
        subjects,
        pools,
        split,
    })
}

impl Dataset {
    pub fn manifest(&self, config: &DatasetConfig) -> DatasetManifest {
        DatasetManifest {
            seed: self.seed,
            config: config.clone(),
            subjects: self
                .subjects
                .iter()
                .zip(&self.pools)
                .map(|(s, p)| SubjectEntry {
                    id: s.id,
                    gender: s.gender,
                    provenance: s.provenance.clone(),
                    expansion: p.clone(),
                })
                .collect(),
            train: self.split.train_keys.clone(),
            test: self.split.test_keys.clone(),
        }
    }
}

impl DatasetManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            offset: e.column(),
            message: format!("{}: {e}", path.display()),
        })
    }
}
