use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusedModel, Logits, ModalityMask, MultimodalSample};
use crate::numcore::{sigmoid, softmax_rows, Adam, AdamConfig, Mode, Parameterized, Tensor};
use crate::types::Gender;

const EVAL_CHUNK: usize = 64;

fn default_epochs() -> usize {
    30
}

fn default_batch() -> usize {
    32
}

fn all_modalities() -> ModalityMask {
    ModalityMask::ALL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Drives minibatch shuffling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Modalities the model may read; others are treated as absent.
    #[serde(default = "all_modalities")]
    pub modalities: ModalityMask,
    /// Stop early once an epoch's running training ID accuracy reaches this.
    #[serde(default)]
    pub target_train_accuracy: Option<f64>,
    /// After the last epoch, replace batch-norm running statistics with
    /// exact training-set statistics under the final weights.
    #[serde(default = "yes")]
    pub recalibrate_bn: bool,
}

fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            adam: AdamConfig::default(),
            modalities: ModalityMask::ALL,
            target_train_accuracy: None,
            recalibrate_bn: true,
        }
    }
}

/// Per-epoch means over the training samples (train-mode forward passes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub id_loss: f64,
    pub gender_loss: f64,
    pub id_accuracy: f64,
    pub gender_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

/// Minibatch Adam training; fully determined by the model's initial state,
/// the sample order and `cfg`.
pub fn train(
    model: &mut FusedModel,
    samples: &[MultimodalSample],
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    if samples.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.person_label >= model.num_subjects()) {
        return Err(Error::Label {
            label: s.person_label,
            classes: model.num_subjects(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainingLog::default();
    let n = samples.len() as f64;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut l_id, mut l_gender) = (0.0, 0.0, 0.0);
        let (mut id_hits, mut gender_hits) = (0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&MultimodalSample> = chunk.iter().map(|&i| &samples[i]).collect();
            model.zero_grad();
            let logits = model.forward(&batch, cfg.modalities, Mode::Train)?;
            let (parts, grads) = model.loss(&logits, &batch)?;
            if !parts.total.is_finite() || !logits.id.all_finite() || !logits.gender.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite loss {}", parts.total),
                });
            }
            model.backward(&grads)?;
            adam.step(model)?;
            let w = batch.len() as f64;
            loss += parts.total * w;
            l_id += parts.id * w;
            l_gender += parts.gender * w;
            let (ih, gh) = hits(&logits, &batch);
            id_hits += ih;
            gender_hits += gh;
        }
        let entry = EpochLog {
            epoch,
            loss: loss / n,
            id_loss: l_id / n,
            gender_loss: l_gender / n,
            id_accuracy: id_hits as f64 / n,
            gender_accuracy: gender_hits as f64 / n,
        };
        log.epochs.push(entry);
        if cfg.target_train_accuracy.is_some_and(|t| entry.id_accuracy >= t) {
            break;
        }
    }
    if cfg.recalibrate_bn {
        model.recalibrate_bn(samples, cfg.modalities)?;
    }
    Ok(log)
}

/// First index of the maximum; ties go to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn hits(logits: &Logits, batch: &[&MultimodalSample]) -> (usize, usize) {
    let mut id = 0;
    let mut gender = 0;
    for (r, s) in batch.iter().enumerate() {
        if argmax(logits.id.row(r)) == s.person_label {
            id += 1;
        }
        if u8::from(logits.gender.data()[r] >= 0.0) == s.gender_label {
            gender += 1;
        }
    }
    (id, gender)
}

/// Inference-mode logits for many samples, computed in chunks.
pub fn infer(model: &mut FusedModel, samples: &[MultimodalSample], active: ModalityMask) -> Result<Logits> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate".into()));
    }
    let s = model.num_subjects();
    let mut id = Vec::with_capacity(samples.len() * s);
    let mut gender = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let batch: Vec<&MultimodalSample> = chunk.iter().collect();
        let out = model.forward(&batch, active, Mode::Infer)?;
        id.extend_from_slice(out.id.data());
        gender.extend_from_slice(out.gender.data());
    }
    Ok(Logits {
        id: Tensor::new(vec![samples.len(), s], id)?,
        gender: Tensor::new(vec![samples.len(), 1], gender)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub id: f64,
    pub gender: f64,
    pub samples: usize,
}

/// Identification and gender accuracy in inference mode.
pub fn evaluate(
    model: &mut FusedModel,
    samples: &[MultimodalSample],
    active: ModalityMask,
) -> Result<Accuracy> {
    let logits = infer(model, samples, active)?;
    let refs: Vec<&MultimodalSample> = samples.iter().collect();
    let (id, gender) = hits(&logits, &refs);
    let n = samples.len() as f64;
    Ok(Accuracy {
        id: id as f64 / n,
        gender: gender as f64 / n,
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub person_id: usize,
    pub gender: Gender,
    /// Softmax over subjects.
    pub id_scores: Vec<f64>,
    /// Probability of label 1 (female).
    pub female_probability: f64,
}

/// Single-sample inference using batch-norm running statistics.
pub fn predict(model: &mut FusedModel, sample: &MultimodalSample, mask: ModalityMask) -> Result<Prediction> {
    if !sample.mask.intersect(&mask).any() {
        return Err(Error::MaskExhausted(format!(
            "no modality left: sample has {}, requested {mask}",
            sample.mask
        )));
    }
    let out = model.forward(&[sample], mask, Mode::Infer)?;
    let scores = softmax_rows(&out.id)?.into_data();
    let z = out.gender.data()[0];
    Ok(Prediction {
        person_id: argmax(out.id.row(0)),
        gender: if z >= 0.0 { Gender::Female } else { Gender::Male },
        id_scores: scores,
        female_probability: sigmoid(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[-3.0]), 0);
    }
}
