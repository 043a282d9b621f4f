//! Experiment controller: TOML experiment configs, the three sweeps
//! (modality subsets, task modes, noise on/off) and their reports.

mod gradsuite;
mod reference;
mod report;
mod sweep;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetConfig, NoiseProtocol};
use crate::error::{Error, Result};
use crate::fusion::{FusionRule, ModalityMask, ModelConfig, TaskMode, TrainConfig};
use crate::numcore::conv1d::DEFAULT_KERNEL;
use crate::numcore::AdamConfig;
use crate::vision::ExtractorConfig;

pub use gradsuite::{gradient_suite, GradSuiteEntry};
pub use reference::{published_reference, ReferenceTable};
pub use report::{ReportFormat, ResultRow, ResultsTable, COLUMNS};
pub use sweep::{derive_seed, execute, output_dir, run, run_cell, sweep, CellSpec, OUTPUT_ENV};

/// Which experiment grid to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// The configured cell only, once per seed.
    Single,
    /// All seven non-empty modality subsets, multitask, noisy.
    Modalities,
    /// id_only, gender_only and multitask on all modalities, noisy.
    Tasks,
    /// The four multi-modality subsets, each noisy and clean.
    Noise,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Single => "run",
            SweepKind::Modalities => "modalities",
            SweepKind::Tasks => "tasks",
            SweepKind::Noise => "noise",
        }
    }

    pub fn rows_per_seed(&self) -> usize {
        match self {
            SweepKind::Single => 1,
            SweepKind::Modalities => 7,
            SweepKind::Tasks => 3,
            SweepKind::Noise => 8,
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modalities" => Ok(SweepKind::Modalities),
            "tasks" => Ok(SweepKind::Tasks),
            "noise" => Ok(SweepKind::Noise),
            other => Err(Error::Config(format!(
                "unknown sweep {other:?} (expected modalities, tasks or noise)"
            ))),
        }
    }
}

/// Feature-level fusion (one network) or score-level fusion of
/// independently trained single-modality networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionLevel {
    Feature,
    Score(FusionRule),
}

impl TryFrom<String> for FusionLevel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s == "feature" {
            Ok(FusionLevel::Feature)
        } else {
            s.parse().map(FusionLevel::Score).map_err(|_| {
                Error::Config(format!("fusion must be feature, sum, product or max, got {s:?}"))
            })
        }
    }
}

impl From<FusionLevel> for String {
    fn from(f: FusionLevel) -> String {
        match f {
            FusionLevel::Feature => "feature".into(),
            FusionLevel::Score(rule) => rule.to_string(),
        }
    }
}

fn default_trunk() -> Vec<usize> {
    vec![256, 256]
}

fn default_channels() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_image_kernel() -> usize {
    3
}

fn default_ecg_kernel() -> usize {
    DEFAULT_KERNEL
}

fn one() -> f64 {
    1.0
}

/// Network shape; subject count, image size and task come from elsewhere
/// in the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    #[serde(default = "default_trunk")]
    pub trunk: Vec<usize>,
    #[serde(default = "default_channels")]
    pub image_channels: Vec<usize>,
    #[serde(default = "default_image_kernel")]
    pub image_kernel: usize,
    #[serde(default = "default_ecg_kernel")]
    pub ecg_kernel: usize,
    #[serde(default = "one")]
    pub id_weight: f64,
    #[serde(default = "one")]
    pub gender_weight: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            trunk: default_trunk(),
            image_channels: default_channels(),
            image_kernel: default_image_kernel(),
            ecg_kernel: default_ecg_kernel(),
            id_weight: 1.0,
            gender_weight: 1.0,
        }
    }
}

impl ArchitectureConfig {
    pub fn model_config(&self, num_subjects: usize, image_size: usize, task_mode: TaskMode) -> ModelConfig {
        ModelConfig {
            num_subjects,
            task_mode,
            trunk: self.trunk.clone(),
            image: ExtractorConfig {
                input_width: image_size,
                input_height: image_size,
                channels: self.image_channels.clone(),
                kernel: self.image_kernel,
            },
            ecg_kernel: self.ecg_kernel,
            id_weight: self.id_weight,
            gender_weight: self.gender_weight,
        }
    }
}

fn default_epochs() -> usize {
    30
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub target_train_accuracy: Option<f64>,
    #[serde(default = "yes")]
    pub recalibrate_bn: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            adam: AdamConfig::default(),
            target_train_accuracy: None,
            recalibrate_bn: true,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self, seed: u64, modalities: ModalityMask) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            adam: self.adam,
            modalities,
            target_train_accuracy: self.target_train_accuracy,
            recalibrate_bn: self.recalibrate_bn,
        }
    }
}

fn yes() -> bool {
    true
}

/// Noise protocol plus whether a single run applies it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub ecg_sigma: Option<f64>,
    #[serde(default)]
    pub finger_fraction: Option<f64>,
    #[serde(default)]
    pub face_fraction: Option<f64>,
    #[serde(default)]
    pub test_only: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            ecg_sigma: None,
            finger_fraction: None,
            face_fraction: None,
            test_only: false,
        }
    }
}

impl NoiseSettings {
    /// The configured protocol, with unset fields at their defaults.
    pub fn protocol(&self) -> NoiseProtocol {
        let d = NoiseProtocol::default();
        NoiseProtocol {
            ecg_sigma: self.ecg_sigma.unwrap_or(d.ecg_sigma),
            finger_fraction: self.finger_fraction.unwrap_or(d.finger_fraction),
            face_fraction: self.face_fraction.unwrap_or(d.face_fraction),
            test_only: self.test_only,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_modalities() -> ModalityMask {
    ModalityMask::ALL
}

fn default_task() -> TaskMode {
    TaskMode::Multitask
}

fn default_fusion() -> FusionLevel {
    FusionLevel::Feature
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_modalities")]
    pub modalities: ModalityMask,
    #[serde(default = "default_task")]
    pub task: TaskMode,
    #[serde(default = "default_fusion")]
    pub fusion: FusionLevel,
    /// Report directory; the `BIOFUSE_OUT` environment variable overrides it.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Also write a checkpoint directory per trained cell.
    #[serde(default)]
    pub save_models: bool,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ArchitectureConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub noise: NoiseSettings,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("name: {:?} is not a usable file stem", self.name)));
        }
        if !(self.dataset.split_ratio > 0.0 && self.dataset.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "dataset.split_ratio: must be in (0, 1), got {}",
                self.dataset.split_ratio
            )));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(Error::Config("train.epochs and train.batch_size must be positive".into()));
        }
        self.noise
            .protocol()
            .validate()
            .map_err(|e| Error::Config(format!("noise: {e}")))?;
        self.model
            .model_config(2, self.dataset.image_size, self.task)
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset.source.synthetic]
        n_subjects = 4
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.modalities, ModalityMask::ALL);
        assert_eq!(cfg.fusion, FusionLevel::Feature);
        assert!(cfg.noise.enabled);
        assert_eq!(cfg.noise.protocol(), NoiseProtocol::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.fusion = FusionLevel::Score(FusionRule::Product);
        cfg.modalities = "face+finger".parse().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}\n[train]\nepoch = 3\n")).unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
        let err = ExperimentConfig::from_toml_str(&format!("seeds = []\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("seeds"), "{err}");
        let err = ExperimentConfig::from_toml_str(&format!("fusion = \"mean\"\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("fusion"), "{err}");
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}\n[noise]\nface_fraction = 2.0\n")).unwrap_err();
        assert!(err.to_string().contains("face_fraction"), "{err}");
        assert!(ExperimentConfig::from_toml_str("name = \"x\"").unwrap_err().to_string().contains("dataset"));
    }

    #[test]
    fn sweep_names() {
        for k in [SweepKind::Modalities, SweepKind::Tasks, SweepKind::Noise] {
            assert_eq!(k.name().parse::<SweepKind>().unwrap(), k);
        }
        assert!("tables".parse::<SweepKind>().is_err());
    }
}
