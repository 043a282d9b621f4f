//! Feature-level fusion network, training loop and score-level fusion.
//!
//! Each modality has its own extractor producing a `d = 300` feature. The
//! features are L2-normalized, batch-normalized over the rows where that
//! modality is present, concatenated as `(ecg, face, finger)` and fed to a
//! shared dense trunk with an identity head and a gender head.

mod layer;
mod model;
mod persist;
mod score;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ecg::EcgInput;
use crate::error::{Error, Result};
use crate::types::Modality;
use crate::vision::Image;

pub use layer::{fuse_features, normalize_feature};
pub use model::{FusedModel, Logits, LossBreakdown, ModelConfig};
pub use persist::{load_model, save_model, ModelManifest};
pub use score::{score_fusion, FusionRule, ScoreEnsemble, ScoreVector};
pub use train::{evaluate, infer, predict, train, Accuracy, EpochLog, Prediction, TrainConfig, TrainingLog};

/// Which modalities a sample (or an experiment) uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Modality>", into = "Vec<Modality>")]
pub struct ModalityMask {
    pub ecg: bool,
    pub face: bool,
    pub finger: bool,
}

impl ModalityMask {
    pub const ALL: ModalityMask = ModalityMask {
        ecg: true,
        face: true,
        finger: true,
    };
    pub const NONE: ModalityMask = ModalityMask {
        ecg: false,
        face: false,
        finger: false,
    };

    pub fn new(ecg: bool, face: bool, finger: bool) -> Self {
        Self { ecg, face, finger }
    }

    pub fn only(m: Modality) -> Self {
        let mut mask = Self::NONE;
        mask.set(m, true);
        mask
    }

    pub fn get(&self, m: Modality) -> bool {
        match m {
            Modality::Ecg => self.ecg,
            Modality::Face => self.face,
            Modality::Finger => self.finger,
        }
    }

    pub fn set(&mut self, m: Modality, on: bool) {
        match m {
            Modality::Ecg => self.ecg = on,
            Modality::Face => self.face = on,
            Modality::Finger => self.finger = on,
        }
    }

    pub fn intersect(&self, other: &ModalityMask) -> Self {
        Self::new(
            self.ecg && other.ecg,
            self.face && other.face,
            self.finger && other.finger,
        )
    }

    pub fn any(&self) -> bool {
        self.ecg || self.face || self.finger
    }

    pub fn count(&self) -> usize {
        Modality::ALL.iter().filter(|&&m| self.get(m)).count()
    }

    pub fn modalities(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&m| self.get(m)).collect()
    }

    /// The seven non-empty subsets: singles, pairs, then all three.
    pub fn nonempty_subsets() -> Vec<ModalityMask> {
        let mut out: Vec<ModalityMask> = (1u8..8)
            .map(|bits| Self::new(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0))
            .collect();
        out.sort_by_key(|m| (m.count(), !m.ecg, !m.face, !m.finger));
        out
    }
}

impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.modalities().iter().map(|m| m.name()).collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

impl FromStr for ModalityMask {
    type Err = Error;

    /// Accepts `ecg+face`, `ecg,finger`, `all`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::ALL);
        }
        let mut mask = Self::NONE;
        for part in s.split(['+', ',']) {
            mask.set(part.trim().parse()?, true);
        }
        if !mask.any() {
            return Err(Error::Config(format!("empty modality set {s:?}")));
        }
        Ok(mask)
    }
}

impl TryFrom<Vec<Modality>> for ModalityMask {
    type Error = Error;

    fn try_from(list: Vec<Modality>) -> Result<Self> {
        let mut mask = Self::NONE;
        for m in list {
            mask.set(m, true);
        }
        if !mask.any() {
            return Err(Error::Config("modality set must not be empty".into()));
        }
        Ok(mask)
    }
}

impl From<ModalityMask> for Vec<Modality> {
    fn from(mask: ModalityMask) -> Self {
        mask.modalities()
    }
}

/// Which loss terms drive training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    IdOnly,
    GenderOnly,
    Multitask,
}

impl TaskMode {
    pub const ALL: [TaskMode; 3] = [TaskMode::IdOnly, TaskMode::GenderOnly, TaskMode::Multitask];

    pub fn name(&self) -> &'static str {
        match self {
            TaskMode::IdOnly => "id_only",
            TaskMode::GenderOnly => "gender_only",
            TaskMode::Multitask => "multitask",
        }
    }

    pub fn uses_id(&self) -> bool {
        !matches!(self, TaskMode::GenderOnly)
    }

    pub fn uses_gender(&self) -> bool {
        !matches!(self, TaskMode::IdOnly)
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskMode::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown task mode {s:?}")))
    }
}

/// One labelled multimodal input.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSample {
    pub ecg: Option<EcgInput>,
    pub face: Option<Image>,
    pub finger: Option<Image>,
    pub mask: ModalityMask,
    pub person_label: usize,
    /// 0 = male, 1 = female.
    pub gender_label: u8,
}

impl MultimodalSample {
    /// Builds a sample whose mask mirrors the inputs provided.
    pub fn new(
        ecg: Option<EcgInput>,
        face: Option<Image>,
        finger: Option<Image>,
        person_label: usize,
        gender_label: u8,
    ) -> Result<Self> {
        let mask = ModalityMask::new(ecg.is_some(), face.is_some(), finger.is_some());
        if !mask.any() {
            return Err(Error::MaskExhausted("sample has no modality".into()));
        }
        if gender_label > 1 {
            return Err(Error::Label {
                label: gender_label as usize,
                classes: 2,
            });
        }
        Ok(Self {
            ecg,
            face,
            finger,
            mask,
            person_label,
            gender_label,
        })
    }

    /// Checks that every mask bit matches the presence of its input.
    pub fn validate(&self) -> Result<()> {
        let actual = ModalityMask::new(self.ecg.is_some(), self.face.is_some(), self.finger.is_some());
        if actual != self.mask {
            return Err(Error::param(format!(
                "mask {} disagrees with provided inputs {}",
                self.mask, actual
            )));
        }
        Ok(())
    }

    /// Copy with the modalities outside `keep` removed.
    pub fn restricted(&self, keep: ModalityMask) -> Result<Self> {
        let mask = self.mask.intersect(&keep);
        if !mask.any() {
            return Err(Error::MaskExhausted(format!(
                "restricting {} to {} leaves nothing",
                self.mask, keep
            )));
        }
        Ok(Self {
            ecg: self.ecg.clone().filter(|_| mask.ecg),
            face: self.face.clone().filter(|_| mask.face),
            finger: self.finger.clone().filter(|_| mask.finger),
            mask,
            ..self.clone()
        })
    }
}
