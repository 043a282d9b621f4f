use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{dense_forward, Conv2d, Dense, GlobalAvgPool, LayerParams, Parameterized, Relu, Tensor};
use crate::types::Modality;
use crate::vision::Image;

/// Fixed-dimension embedding tagged with its source modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub modality: Modality,
    pub values: Vec<f64>,
}

/// Conv stack shape for an image extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub input_width: usize,
    pub input_height: usize,
    /// Output channels of each stride-2 conv block.
    pub channels: Vec<usize>,
    pub kernel: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            input_width: 64,
            input_height: 64,
            channels: vec![8, 16, 32],
            kernel: 3,
        }
    }
}

/// Stride-2 conv blocks with ReLU, then global average pooling.
#[derive(Debug, Clone)]
pub struct ImageExtractor {
    pub config: ExtractorConfig,
    pub convs: Vec<Conv2d>,
    relus: Vec<Relu>,
    pool: GlobalAvgPool,
}

impl ImageExtractor {
    pub fn new<R: Rng + ?Sized>(config: ExtractorConfig, rng: &mut R) -> Result<Self> {
        if config.channels.is_empty() {
            return Err(Error::Config("extractor needs at least one conv block".into()));
        }
        let mut convs = Vec::with_capacity(config.channels.len());
        let mut cin = 1;
        for &cout in &config.channels {
            convs.push(Conv2d::new(cin, cout, config.kernel, 2, config.kernel / 2, rng)?);
            cin = cout;
        }
        let relus = vec![Relu::new(); convs.len()];
        Ok(Self {
            config,
            convs,
            relus,
            pool: GlobalAvgPool::new(),
        })
    }

    pub fn embedding_dim(&self) -> usize {
        *self.config.channels.last().expect("non-empty channels")
    }

    /// Feature map before pooling, `[B, C, h, w]`.
    pub fn feature_map(&mut self, x: &Tensor) -> Result<Tensor> {
        let (w, h) = (self.config.input_width, self.config.input_height);
        if x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != h || x.dim(3) != w {
            return Err(Error::dim(format!(
                "image extractor expects [B, 1, {h}, {w}], got {:?}",
                x.shape()
            )));
        }
        let mut a = x.clone();
        for (conv, relu) in self.convs.iter_mut().zip(&mut self.relus) {
            a = relu.forward(&conv.forward(&a)?);
        }
        Ok(a)
    }

    /// `[B, 1, H, W] -> [B, C]` raw embedding.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let map = self.feature_map(x)?;
        self.pool.forward(&map)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<()> {
        let mut g = self.pool.backward(dy)?;
        for (conv, relu) in self.convs.iter_mut().zip(&self.relus).rev() {
            g = conv.backward(&relu.backward(&g)?)?;
        }
        Ok(())
    }
}

impl Parameterized for ImageExtractor {
    fn params(&self) -> Vec<&LayerParams> {
        self.convs.iter().map(|c| &c.params).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        self.convs.iter_mut().map(|c| &mut c.params).collect()
    }
}

/// Stacks equally sized images into `[B, 1, H, W]`.
pub fn images_to_tensor(images: &[&Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::EmptyInput("no images to batch".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::dim(format!(
                "cannot batch {}x{} with {w}x{h}",
                img.width(),
                img.height()
            )));
        }
        data.extend_from_slice(img.pixels());
    }
    Tensor::new(vec![images.len(), 1, h, w], data)
}

/// Raw pooled embedding of one standardized image.
pub fn extract_features(img: &Image, extractor: &mut ImageExtractor) -> Result<Vec<f64>> {
    let x = images_to_tensor(&[img])?;
    Ok(extractor.forward(&x)?.into_data())
}

/// Dense map of a raw embedding to the fused dimension.
pub fn project(raw: &[f64], p: &LayerParams, modality: Modality) -> Result<FeatureVector> {
    let x = Tensor::new(vec![1, raw.len()], raw.to_vec())?;
    let y = dense_forward(&x, p)?;
    Ok(FeatureVector {
        modality,
        values: y.into_data(),
    })
}

/// Image extractor followed by its projection layer.
#[derive(Debug, Clone)]
pub struct ImageBranch {
    pub extractor: ImageExtractor,
    pub projection: Dense,
}

impl ImageBranch {
    pub fn new<R: Rng + ?Sized>(config: ExtractorConfig, fused_dim: usize, rng: &mut R) -> Result<Self> {
        let extractor = ImageExtractor::new(config, rng)?;
        let projection = Dense::new(extractor.embedding_dim(), fused_dim, rng);
        Ok(Self {
            extractor,
            projection,
        })
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let raw = self.extractor.forward(x)?;
        self.projection.forward(&raw)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<()> {
        let g = self.projection.backward(dy)?;
        self.extractor.backward(&g)
    }
}

impl Parameterized for ImageBranch {
    fn params(&self) -> Vec<&LayerParams> {
        let mut v = self.extractor.params();
        v.push(&self.projection.params);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut v = self.extractor.params_mut();
        v.push(&mut self.projection.params);
        v
    }
}
