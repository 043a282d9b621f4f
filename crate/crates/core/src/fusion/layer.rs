use crate::error::{Error, Result};
use crate::fusion::ModalityMask;
use crate::numcore::{batch_norm_masked, l2_normalize_in_place, BatchNormState, Tensor};
use crate::types::Modality;
use crate::vision::FeatureVector;

/// L2-normalizes a feature; the zero vector is returned unchanged.
pub fn normalize_feature(f: &FeatureVector) -> FeatureVector {
    let mut values = f.values.clone();
    l2_normalize_in_place(&mut values);
    FeatureVector {
        modality: f.modality,
        values,
    }
}

/// Masked feature-level fusion of a batch.
///
/// `features[m]` is a `[B, d]` tensor for modality `m` (in `ecg, face,
/// finger` order) whose rows are read only where `masks[row]` marks `m`
/// present; it may be `None` when no row uses `m`. Each modality is
/// L2-normalized per row and batch-normalized over its present rows. The
/// `[B, 3d]` output has exact zeros wherever a modality is absent.
pub fn fuse_features(
    features: &[Option<Tensor>; 3],
    masks: &[ModalityMask],
    bn: &mut [BatchNormState; 3],
) -> Result<Tensor> {
    let b = masks.len();
    if b == 0 {
        return Err(Error::EmptyInput("fusion batch is empty".into()));
    }
    let d = bn[0].dim();
    if bn.iter().any(|s| s.dim() != d) {
        return Err(Error::dim("batch-norm states disagree on feature dimension"));
    }
    let mut blocks = Vec::with_capacity(3);
    for m in Modality::ALL {
        let present: Vec<bool> = masks.iter().map(|mask| mask.get(m)).collect();
        let mut block = Tensor::zeros(&[b, d]);
        if present.iter().any(|&p| p) {
            let f = features[m.index()].as_ref().ok_or_else(|| {
                Error::dim(format!("{m} is marked present but no {m} features were given"))
            })?;
            if f.shape() != [b, d] {
                return Err(Error::dim(format!(
                    "{m} features have shape {:?}, expected [{b}, {d}]",
                    f.shape()
                )));
            }
            let mut x = Tensor::zeros(&[b, d]);
            for r in (0..b).filter(|&r| present[r]) {
                let row = x.row_mut(r);
                row.copy_from_slice(f.row(r));
                l2_normalize_in_place(row);
            }
            block = batch_norm_masked(&x, &present, &mut bn[m.index()])?;
        }
        blocks.push(block);
    }
    concat_columns(&blocks)
}

/// `[B, d_i]` blocks side by side.
pub(crate) fn concat_columns(blocks: &[Tensor]) -> Result<Tensor> {
    let b = blocks[0].dim(0);
    let width: usize = blocks.iter().map(|t| t.dim(1)).sum();
    let mut data = Vec::with_capacity(b * width);
    for r in 0..b {
        for t in blocks {
            data.extend_from_slice(t.row(r));
        }
    }
    Tensor::new(vec![b, width], data)
}

/// Inverse of [`concat_columns`] for equal-width blocks.
pub(crate) fn split_columns(x: &Tensor, parts: usize) -> Vec<Tensor> {
    let (b, width) = (x.dim(0), x.dim(1));
    let d = width / parts;
    (0..parts)
        .map(|p| {
            let mut data = Vec::with_capacity(b * d);
            for r in 0..b {
                data.extend_from_slice(&x.row(r)[p * d..(p + 1) * d]);
            }
            Tensor::new(vec![b, d], data).expect("block shape")
        })
        .collect()
}
