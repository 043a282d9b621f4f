//! Model checkpoint directory: `model.params` (numcore tensor format) plus a
//! `model.toml` manifest describing the architecture.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusedModel, ModelConfig};
use crate::numcore::{checkpoint, Parameterized, Tensor};
use crate::types::Modality;

pub const PARAMS_FILE: &str = "model.params";
pub const MANIFEST_FILE: &str = "model.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub feature_dim: usize,
    pub seed: u64,
    pub config: ModelConfig,
}

fn tensors_of(model: &FusedModel) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    for (name, p) in model.named_params() {
        out.push((format!("{name}.w"), p.weights.clone()));
        out.push((format!("{name}.b"), p.bias.clone()));
    }
    for m in Modality::ALL {
        let s = &model.bn[m.index()].state;
        let d = s.dim();
        out.push((
            format!("bn.{m}.running_mean"),
            Tensor::new(vec![d], s.running_mean.clone()).expect("running mean shape"),
        ));
        out.push((
            format!("bn.{m}.running_var"),
            Tensor::new(vec![d], s.running_var.clone()).expect("running var shape"),
        ));
    }
    out
}

/// Writes parameters, running statistics and the manifest into `dir`.
pub fn save_model(dir: &Path, model: &FusedModel, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    checkpoint::save(&dir.join(PARAMS_FILE), &tensors_of(model))?;
    let manifest = ModelManifest {
        feature_dim: FusedModel::FEATURE_DIM,
        seed,
        config: model.config().clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(dir: &Path) -> Result<(FusedModel, ModelManifest)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ModelManifest =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if manifest.feature_dim != FusedModel::FEATURE_DIM {
        return Err(Error::Config(format!(
            "checkpoint feature_dim {} does not match {}",
            manifest.feature_dim,
            FusedModel::FEATURE_DIM
        )));
    }
    let mut model = FusedModel::new(manifest.config.clone(), manifest.seed)?;
    let mut stored: HashMap<String, Tensor> = checkpoint::load(&dir.join(PARAMS_FILE))?.into_iter().collect();
    let mut take = |name: String, shape: &[usize]| -> Result<Tensor> {
        let t = stored
            .remove(&name)
            .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {name}")))?;
        if t.shape() != shape {
            return Err(Error::dim(format!(
                "tensor {name} has shape {:?}, model expects {shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    };
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    for (name, p) in names.into_iter().zip(model.params_mut()) {
        p.weights = take(format!("{name}.w"), p.weights.shape())?;
        p.bias = take(format!("{name}.b"), p.bias.shape())?;
    }
    for m in Modality::ALL {
        let s = &mut model.bn[m.index()].state;
        let d = s.dim();
        s.running_mean = take(format!("bn.{m}.running_mean"), &[d])?.into_data();
        s.running_var = take(format!("bn.{m}.running_var"), &[d])?.into_data();
    }
    if let Some(extra) = stored.keys().min() {
        return Err(Error::Config(format!("checkpoint has unknown tensor {extra}")));
    }
    Ok((model, manifest))
}
