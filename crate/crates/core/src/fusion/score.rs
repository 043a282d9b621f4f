use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::train::{argmax, infer, train, Accuracy, TrainConfig, TrainingLog};
use crate::fusion::{FusedModel, ModalityMask, ModelConfig, MultimodalSample};
use crate::numcore::{sigmoid, softmax_rows};
use crate::types::Modality;

/// Class probabilities from one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("score vector is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("score {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fused decision; ties go to the lowest class index.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Sum,
    Product,
    Max,
}

impl FusionRule {
    pub const ALL: [FusionRule; 3] = [FusionRule::Sum, FusionRule::Product, FusionRule::Max];
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionRule::Sum => "sum",
            FusionRule::Product => "product",
            FusionRule::Max => "max",
        })
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionRule::ALL
            .into_iter()
            .find(|r| r.to_string() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown fusion rule {s:?}")))
    }
}

/// Elementwise sum, product or max of the inputs, renormalized to sum 1.
/// If every combined entry is zero (a product that underflowed), the result
/// is uniform.
pub fn score_fusion(scores: &[ScoreVector], rule: FusionRule) -> Result<ScoreVector> {
    let first = scores
        .first()
        .ok_or_else(|| Error::EmptyInput("score fusion needs at least one vector".into()))?;
    let n = first.len();
    if let Some(bad) = scores.iter().find(|s| s.len() != n) {
        return Err(Error::dim(format!(
            "score vectors have lengths {n} and {}",
            bad.len()
        )));
    }
    let mut acc = first.values.clone();
    for s in &scores[1..] {
        for (a, &v) in acc.iter_mut().zip(&s.values) {
            *a = match rule {
                FusionRule::Sum => *a + v,
                FusionRule::Product => *a * v,
                FusionRule::Max => a.max(v),
            };
        }
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    } else {
        acc.fill(1.0 / n as f64);
    }
    Ok(ScoreVector { values: acc })
}

/// Independent single-modality models combined at the score level.
#[derive(Debug, Clone)]
pub struct ScoreEnsemble {
    pub members: Vec<(Modality, FusedModel)>,
}

impl ScoreEnsemble {
    /// Trains one model per modality in `modalities`, each seeing only its
    /// own modality. Member `k` is initialized with `seed + k` (wrapping).
    pub fn train(
        config: &ModelConfig,
        modalities: ModalityMask,
        seed: u64,
        samples: &[MultimodalSample],
        train_cfg: &TrainConfig,
    ) -> Result<(Self, Vec<TrainingLog>)> {
        let mut members = Vec::new();
        let mut logs = Vec::new();
        for (k, m) in modalities.modalities().into_iter().enumerate() {
            let mut model = FusedModel::new(config.clone(), seed.wrapping_add(k as u64))?;
            let cfg = TrainConfig {
                modalities: ModalityMask::only(m),
                ..train_cfg.clone()
            };
            logs.push(train(&mut model, samples, &cfg)?);
            members.push((m, model));
        }
        if members.is_empty() {
            return Err(Error::Config("score ensemble needs at least one modality".into()));
        }
        Ok((Self { members }, logs))
    }

    /// Fused ID scores and fused `[male, female]` scores for every sample.
    pub fn fused_scores(
        &mut self,
        samples: &[MultimodalSample],
        rule: FusionRule,
    ) -> Result<Vec<(ScoreVector, ScoreVector)>> {
        let mut per_model = Vec::with_capacity(self.members.len());
        for (m, model) in &mut self.members {
            let logits = infer(model, samples, ModalityMask::only(*m))?;
            per_model.push((softmax_rows(&logits.id)?, logits.gender));
        }
        (0..samples.len())
            .map(|r| {
                let mut ids = Vec::with_capacity(per_model.len());
                let mut genders = Vec::with_capacity(per_model.len());
                for (probs, g) in &per_model {
                    ids.push(ScoreVector::new(probs.row(r).to_vec())?);
                    let p = sigmoid(g.data()[r]);
                    genders.push(ScoreVector::new(vec![1.0 - p, p])?);
                }
                Ok((score_fusion(&ids, rule)?, score_fusion(&genders, rule)?))
            })
            .collect()
    }

    pub fn evaluate(&mut self, samples: &[MultimodalSample], rule: FusionRule) -> Result<Accuracy> {
        let fused = self.fused_scores(samples, rule)?;
        let mut id = 0;
        let mut gender = 0;
        for (s, (ids, g)) in samples.iter().zip(&fused) {
            id += usize::from(ids.argmax() == s.person_label);
            gender += usize::from(g.argmax() == s.gender_label as usize);
        }
        let n = samples.len() as f64;
        Ok(Accuracy {
            id: id as f64 / n,
            gender: gender as f64 / n,
            samples: samples.len(),
        })
    }
}
