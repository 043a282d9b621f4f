use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ecg::{QRS_LEN, SEQ_LEN};
use crate::error::{Error, Result};
use crate::fusion::layer::{concat_columns, split_columns};
use crate::fusion::{ModalityMask, MultimodalSample, TaskMode};
use crate::numcore::conv1d::DEFAULT_KERNEL;
use crate::numcore::{
    binary_cross_entropy, l2_normalize_in_place, softmax_cross_entropy, BatchNorm, Conv1d, Dense, L2Normalize,
    LayerParams, MaxPoolTime, Mode, Parameterized, Relu, Tensor,
};
use crate::types::Modality;
use crate::vision::{images_to_tensor, ExtractorConfig, Image, ImageBranch};

fn default_trunk() -> Vec<usize> {
    vec![256, 256]
}

fn default_kernel() -> usize {
    DEFAULT_KERNEL
}

fn one() -> f64 {
    1.0
}

fn default_task() -> TaskMode {
    TaskMode::Multitask
}

/// Architecture and loss routing of a [`FusedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_subjects: usize,
    #[serde(default = "default_task")]
    pub task_mode: TaskMode,
    /// Widths of the shared dense trunk.
    #[serde(default = "default_trunk")]
    pub trunk: Vec<usize>,
    /// Extractor shape used for both face and fingerprint.
    #[serde(default)]
    pub image: ExtractorConfig,
    #[serde(default = "default_kernel")]
    pub ecg_kernel: usize,
    #[serde(default = "one")]
    pub id_weight: f64,
    #[serde(default = "one")]
    pub gender_weight: f64,
}

impl ModelConfig {
    pub fn new(num_subjects: usize) -> Self {
        Self {
            num_subjects,
            task_mode: TaskMode::Multitask,
            trunk: default_trunk(),
            image: ExtractorConfig::default(),
            ecg_kernel: DEFAULT_KERNEL,
            id_weight: 1.0,
            gender_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subjects < 2 {
            return Err(Error::Config(format!(
                "num_subjects must be at least 2, got {}",
                self.num_subjects
            )));
        }
        if self.trunk.contains(&0) {
            return Err(Error::Config("trunk widths must be positive".into()));
        }
        if self.image.channels.is_empty() || self.image.channels.contains(&0) {
            return Err(Error::Config("image.channels must be non-empty and positive".into()));
        }
        if self.image.input_width == 0 || self.image.input_height == 0 {
            return Err(Error::Config("image input size must be positive".into()));
        }
        if self.ecg_kernel % 2 == 0 {
            return Err(Error::Config(format!("ecg_kernel must be odd, got {}", self.ecg_kernel)));
        }
        if !(self.id_weight >= 0.0 && self.gender_weight >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Raw outputs of both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    /// `[B, S]`
    pub id: Tensor,
    /// `[B, 1]`
    pub gender: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Loss actually optimized under the task mode.
    pub total: f64,
    pub id: f64,
    pub gender: f64,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    batch: usize,
    rows: [Vec<usize>; 3],
}

/// Per-modality extractors, masked fusion, shared trunk and two heads.
#[derive(Debug, Clone)]
pub struct FusedModel {
    config: ModelConfig,
    pub ecg_conv: Conv1d,
    ecg_pool: MaxPoolTime,
    pub face: ImageBranch,
    pub finger: ImageBranch,
    l2: [L2Normalize; 3],
    pub bn: [BatchNorm; 3],
    pub trunk: Vec<Dense>,
    trunk_relu: Vec<Relu>,
    pub id_head: Dense,
    pub gender_head: Dense,
    cache: Option<ForwardCache>,
}

impl FusedModel {
    /// Fused feature width per modality; equal to the ECG window length.
    pub const FEATURE_DIM: usize = QRS_LEN;

    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = Self::FEATURE_DIM;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ecg_conv = Conv1d::new(QRS_LEN, config.ecg_kernel, &mut rng)?;
        let face = ImageBranch::new(config.image.clone(), d, &mut rng)?;
        let finger = ImageBranch::new(config.image.clone(), d, &mut rng)?;
        let mut trunk = Vec::with_capacity(config.trunk.len());
        let mut width = 3 * d;
        for &w in &config.trunk {
            trunk.push(Dense::new(width, w, &mut rng));
            width = w;
        }
        let id_head = Dense::new(width, config.num_subjects, &mut rng);
        let gender_head = Dense::new(width, 1, &mut rng);
        Ok(Self {
            ecg_conv,
            ecg_pool: MaxPoolTime::new(),
            face,
            finger,
            l2: Default::default(),
            bn: [BatchNorm::new(d), BatchNorm::new(d), BatchNorm::new(d)],
            trunk_relu: vec![Relu::new(); trunk.len()],
            trunk,
            id_head,
            gender_head,
            cache: None,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_subjects(&self) -> usize {
        self.config.num_subjects
    }

    pub fn task_mode(&self) -> TaskMode {
        self.config.task_mode
    }

    pub fn set_task_mode(&mut self, mode: TaskMode) {
        self.config.task_mode = mode;
    }

    fn set_mode(&mut self, mode: Mode) {
        for bn in &mut self.bn {
            bn.set_mode(mode);
        }
    }

    /// Runs the network on `batch`, using only modalities both marked in a
    /// sample's mask and enabled in `active`. Extractors see only the rows
    /// where their modality is present.
    pub fn forward(
        &mut self,
        batch: &[&MultimodalSample],
        active: ModalityMask,
        mode: Mode,
    ) -> Result<Logits> {
        let b = batch.len();
        if b == 0 {
            return Err(Error::EmptyInput("forward on an empty batch".into()));
        }
        self.set_mode(mode);
        let mut rows: [Vec<usize>; 3] = Default::default();
        for (r, s) in batch.iter().enumerate() {
            let mask = s.mask.intersect(&active);
            if !mask.any() {
                return Err(Error::MaskExhausted(format!(
                    "sample {r} has no usable modality (mask {}, active {active})",
                    s.mask
                )));
            }
            for m in mask.modalities() {
                rows[m.index()].push(r);
            }
        }

        let d = Self::FEATURE_DIM;
        let mut blocks = Vec::with_capacity(3);
        for m in Modality::ALL {
            let idx = &rows[m.index()];
            if idx.is_empty() {
                blocks.push(Tensor::zeros(&[b, d]));
                continue;
            }
            let sub = self.extract(m, batch, idx)?;
            let mut full = Tensor::zeros(&[b, d]);
            for (k, &r) in idx.iter().enumerate() {
                full.row_mut(r).copy_from_slice(sub.row(k));
            }
            let present: Vec<bool> = (0..b).map(|r| idx.binary_search(&r).is_ok()).collect();
            let normed = self.l2[m.index()].forward(&full)?;
            blocks.push(self.bn[m.index()].forward(&normed, &present)?);
        }
        let mut h = concat_columns(&blocks)?;
        for (dense, relu) in self.trunk.iter_mut().zip(&mut self.trunk_relu) {
            h = relu.forward(&dense.forward(&h)?);
        }
        let id = self.id_head.forward(&h)?;
        let gender = self.gender_head.forward(&h)?;
        self.cache = Some(ForwardCache { batch: b, rows });
        Ok(Logits { id, gender })
    }

    /// Replaces every batch-norm layer's running statistics with the exact
    /// mean and unbiased variance of its input over `samples` (present rows
    /// only), computed with the current weights. Modalities with fewer than
    /// two present rows keep their statistics.
    pub fn recalibrate_bn(&mut self, samples: &[MultimodalSample], active: ModalityMask) -> Result<()> {
        let d = Self::FEATURE_DIM;
        let mut sum: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; d]);
        let mut sq: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; d]);
        let mut count = [0usize; 3];
        for chunk in samples.chunks(64) {
            let batch: Vec<&MultimodalSample> = chunk.iter().collect();
            for m in Modality::ALL {
                let idx: Vec<usize> = (0..batch.len())
                    .filter(|&r| batch[r].mask.intersect(&active).get(m))
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let mut f = self.extract(m, &batch, &idx)?;
                let k = m.index();
                for r in 0..idx.len() {
                    let row = f.row_mut(r);
                    l2_normalize_in_place(row);
                    for (j, &v) in row.iter().enumerate() {
                        sum[k][j] += v;
                        sq[k][j] += v * v;
                    }
                }
                count[k] += idx.len();
            }
        }
        for m in Modality::ALL {
            let k = m.index();
            let n = count[k] as f64;
            if count[k] < 2 {
                continue;
            }
            let state = &mut self.bn[k].state;
            for j in 0..d {
                let mean = sum[k][j] / n;
                state.running_mean[j] = mean;
                state.running_var[j] = ((sq[k][j] - n * mean * mean) / (n - 1.0)).max(f64::EPSILON);
            }
        }
        Ok(())
    }

    fn extract(&mut self, m: Modality, batch: &[&MultimodalSample], idx: &[usize]) -> Result<Tensor> {
        let missing = |r: usize| {
            Error::param(format!("sample {r} marks {m} present but carries no {m} input"))
        };
        match m {
            Modality::Ecg => {
                let mut data = Vec::with_capacity(idx.len() * SEQ_LEN * QRS_LEN);
                for &r in idx {
                    let e = batch[r].ecg.as_ref().ok_or_else(|| missing(r))?;
                    data.extend_from_slice(&e.values);
                }
                let x = Tensor::new(vec![idx.len(), SEQ_LEN, QRS_LEN], data)?;
                let y = self.ecg_conv.forward(&x)?;
                self.ecg_pool.forward(&y)
            }
            Modality::Face | Modality::Finger => {
                let imgs: Vec<&Image> = idx
                    .iter()
                    .map(|&r| {
                        let s = batch[r];
                        if m == Modality::Face { s.face.as_ref() } else { s.finger.as_ref() }
                            .ok_or_else(|| missing(r))
                    })
                    .collect::<Result<_>>()?;
                let x = images_to_tensor(&imgs)?;
                self.branch_mut(m).forward(&x)
            }
        }
    }

    fn branch_mut(&mut self, m: Modality) -> &mut ImageBranch {
        if m == Modality::Face {
            &mut self.face
        } else {
            &mut self.finger
        }
    }

    /// Loss under the configured task mode and the logit gradients that
    /// minimize it. The unused head's gradient is exactly zero.
    pub fn loss(&self, logits: &Logits, batch: &[&MultimodalSample]) -> Result<(LossBreakdown, Logits)> {
        let ids: Vec<usize> = batch.iter().map(|s| s.person_label).collect();
        let genders: Vec<u8> = batch.iter().map(|s| s.gender_label).collect();
        let (l_id, mut g_id) = softmax_cross_entropy(&logits.id, &ids)?;
        let (l_gender, mut g_gender) = binary_cross_entropy(&logits.gender, &genders)?;
        let mode = self.config.task_mode;
        let (wi, wg) = (
            if mode.uses_id() { self.config.id_weight } else { 0.0 },
            if mode.uses_gender() { self.config.gender_weight } else { 0.0 },
        );
        scale(&mut g_id, wi);
        scale(&mut g_gender, wg);
        let total = if mode.uses_id() { wi * l_id } else { 0.0 }
            + if mode.uses_gender() { wg * l_gender } else { 0.0 };
        Ok((
            LossBreakdown {
                total,
                id: l_id,
                gender: l_gender,
            },
            Logits {
                id: g_id,
                gender: g_gender,
            },
        ))
    }

    /// Backpropagates logit gradients from the last [`forward`](Self::forward).
    pub fn backward(&mut self, grads: &Logits) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::EmptyInput("model backward before forward".into()))?;
        let mut g = self.id_head.backward(&grads.id)?;
        g.add_assign(&self.gender_head.backward(&grads.gender)?)?;
        for (dense, relu) in self.trunk.iter_mut().zip(&self.trunk_relu).rev() {
            g = dense.backward(&relu.backward(&g)?)?;
        }
        let parts = split_columns(&g, 3);
        for m in Modality::ALL {
            let idx = &cache.rows[m.index()];
            if idx.is_empty() {
                // Absent for the whole batch: nothing flows in, but the
                // optimizer must still see a (zero) gradient.
                self.bn[m.index()].state.affine.mark_fresh();
                for p in self.extractor_params_mut(m) {
                    p.mark_fresh();
                }
                continue;
            }
            let gbn = self.bn[m.index()].backward(&parts[m.index()])?;
            let gfeat = self.l2[m.index()].backward(&gbn)?.select_rows(idx)?;
            match m {
                Modality::Ecg => {
                    let gpool = self.ecg_pool.backward(&gfeat)?;
                    self.ecg_conv.backward(&gpool)?;
                }
                _ => self.branch_mut(m).backward(&gfeat)?,
            }
        }
        debug_assert!(cache.batch == parts[0].dim(0));
        Ok(())
    }

    /// Extractor and projection parameters of one modality.
    pub fn extractor_params(&self, m: Modality) -> Vec<&LayerParams> {
        match m {
            Modality::Ecg => vec![&self.ecg_conv.params],
            Modality::Face => self.face.params(),
            Modality::Finger => self.finger.params(),
        }
    }

    fn extractor_params_mut(&mut self, m: Modality) -> Vec<&mut LayerParams> {
        match m {
            Modality::Ecg => vec![&mut self.ecg_conv.params],
            Modality::Face => self.face.params_mut(),
            Modality::Finger => self.finger.params_mut(),
        }
    }

    /// Every parameter block with a stable name, in [`Parameterized`] order.
    pub fn named_params(&self) -> Vec<(String, &LayerParams)> {
        let mut out = vec![("ecg.conv".to_string(), &self.ecg_conv.params)];
        for (name, branch) in [("face", &self.face), ("finger", &self.finger)] {
            for (i, c) in branch.extractor.convs.iter().enumerate() {
                out.push((format!("{name}.conv{i}"), &c.params));
            }
            out.push((format!("{name}.proj"), &branch.projection.params));
        }
        for m in Modality::ALL {
            out.push((format!("bn.{m}"), &self.bn[m.index()].state.affine));
        }
        for (i, t) in self.trunk.iter().enumerate() {
            out.push((format!("trunk{i}"), &t.params));
        }
        out.push(("head.id".into(), &self.id_head.params));
        out.push(("head.gender".into(), &self.gender_head.params));
        out
    }
}

fn scale(t: &mut Tensor, w: f64) {
    if w == 0.0 {
        t.fill(0.0);
    } else if w != 1.0 {
        t.data_mut().iter_mut().for_each(|v| *v *= w);
    }
}

impl Parameterized for FusedModel {
    fn params(&self) -> Vec<&LayerParams> {
        self.named_params().into_iter().map(|(_, p)| p).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out = vec![&mut self.ecg_conv.params];
        out.extend(self.face.params_mut());
        out.extend(self.finger.params_mut());
        for bn in &mut self.bn {
            out.push(&mut bn.state.affine);
        }
        for t in &mut self.trunk {
            out.push(&mut t.params);
        }
        out.push(&mut self.id_head.params);
        out.push(&mut self.gender_head.params);
        out
    }
}
