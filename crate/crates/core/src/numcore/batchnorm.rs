//! Batch normalization that ignores rows marked absent.
//!
//! Absent rows contribute nothing to the batch statistics, never touch the
//! running averages, and come out as exact zeros. Present rows are
//! normalized exactly as if the absent rows had never been in the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{LayerParams, Parameterized, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Affine parameters (`gamma` as weights, `beta` as bias) plus running statistics.
#[derive(Debug, Clone)]
pub struct BatchNormState {
    pub affine: LayerParams,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    pub mode: Mode,
}

impl BatchNormState {
    pub fn new(dim: usize) -> Self {
        Self {
            affine: LayerParams::new(Tensor::filled(&[dim], 1.0), Tensor::zeros(&[dim])),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
            mode: Mode::Train,
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }

    pub fn gamma(&self) -> &[f64] {
        self.affine.weights.data()
    }

    pub fn beta(&self) -> &[f64] {
        self.affine.bias.data()
    }
}

#[derive(Debug, Clone)]
struct Cache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    present: Vec<bool>,
    mode: Mode,
}

/// Stateless entry point; see [`BatchNorm`] for the layer with backprop.
pub fn batch_norm_masked(x: &Tensor, present: &[bool], s: &mut BatchNormState) -> Result<Tensor> {
    forward_impl(x, present, s).map(|(y, _)| y)
}

fn forward_impl(x: &Tensor, present: &[bool], s: &mut BatchNormState) -> Result<(Tensor, Cache)> {
    let d = s.dim();
    if x.ndim() != 2 || x.dim(1) != d {
        return Err(Error::dim(format!(
            "batch norm expects [B, {d}], got {:?}",
            x.shape()
        )));
    }
    let b = x.dim(0);
    if present.len() != b {
        return Err(Error::dim(format!(
            "presence mask has {} entries for a batch of {b}",
            present.len()
        )));
    }
    let rows: Vec<usize> = (0..b).filter(|&r| present[r]).collect();
    let (mean, var) = match s.mode {
        Mode::Train => {
            if rows.is_empty() {
                return Err(Error::MaskExhausted(
                    "batch norm in train mode with no present rows".into(),
                ));
            }
            let n = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for &r in &rows {
                mean.iter_mut().zip(x.row(r)).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; d];
            for &r in &rows {
                for (v, (xv, m)) in var.iter_mut().zip(x.row(r).iter().zip(&mean)) {
                    let c = xv - m;
                    *v += c * c;
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            let unbias = if rows.len() > 1 { n / (n - 1.0) } else { 1.0 };
            let mom = s.momentum;
            for j in 0..d {
                s.running_mean[j] = (1.0 - mom) * s.running_mean[j] + mom * mean[j];
                s.running_var[j] = (1.0 - mom) * s.running_var[j] + mom * var[j] * unbias;
            }
            (mean, var)
        }
        Mode::Infer => (s.running_mean.clone(), s.running_var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + s.epsilon).sqrt()).collect();
    let mut xhat = Tensor::zeros(&[b, d]);
    let mut y = Tensor::zeros(&[b, d]);
    let (gamma, beta) = (s.affine.weights.data(), s.affine.bias.data());
    for &r in &rows {
        let xr = x.row(r);
        let xh = xhat.row_mut(r);
        for j in 0..d {
            xh[j] = (xr[j] - mean[j]) * inv_std[j];
        }
        let yr = y.row_mut(r);
        for j in 0..d {
            yr[j] = gamma[j] * xhat.data()[r * d + j] + beta[j];
        }
    }
    Ok((
        y,
        Cache {
            xhat,
            inv_std,
            present: present.to_vec(),
            mode: s.mode,
        },
    ))
}

/// Masked batch-norm layer with cached activations for backprop.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub state: BatchNormState,
    cache: Option<Cache>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self::from_state(BatchNormState::new(dim))
    }

    pub fn from_state(state: BatchNormState) -> Self {
        Self { state, cache: None }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.state.mode = mode;
    }

    pub fn forward(&mut self, x: &Tensor, present: &[bool]) -> Result<Tensor> {
        let (y, cache) = forward_impl(x, present, &mut self.state)?;
        self.cache = Some(cache);
        Ok(y)
    }

    /// Gradient w.r.t. the input; absent rows get exact zeros.
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("batch norm backward before forward".into()))?;
        let (b, d) = (cache.xhat.dim(0), cache.xhat.dim(1));
        if dy.shape() != [b, d] {
            return Err(Error::dim(format!(
                "batch norm upstream gradient {:?}, expected [{b}, {d}]",
                dy.shape()
            )));
        }
        let rows: Vec<usize> = (0..b).filter(|&r| cache.present[r]).collect();
        let gamma = self.state.affine.weights.data().to_vec();
        let mut dgamma = vec![0.0; d];
        let mut dbeta = vec![0.0; d];
        for &r in &rows {
            for j in 0..d {
                let g = dy.data()[r * d + j];
                dgamma[j] += g * cache.xhat.data()[r * d + j];
                dbeta[j] += g;
            }
        }
        let mut dx = Tensor::zeros(&[b, d]);
        match cache.mode {
            Mode::Train => {
                let n = rows.len() as f64;
                for &r in &rows {
                    for j in 0..d {
                        let g = dy.data()[r * d + j];
                        let xh = cache.xhat.data()[r * d + j];
                        dx.data_mut()[r * d + j] = gamma[j] * cache.inv_std[j] / n
                            * (n * g - dbeta[j] - xh * dgamma[j]);
                    }
                }
            }
            Mode::Infer => {
                for &r in &rows {
                    for j in 0..d {
                        dx.data_mut()[r * d + j] =
                            dy.data()[r * d + j] * gamma[j] * cache.inv_std[j];
                    }
                }
            }
        }
        let p = &mut self.state.affine;
        p.grad_weights.data_mut().iter_mut().zip(&dgamma).for_each(|(a, v)| *a += v);
        p.grad_bias.data_mut().iter_mut().zip(&dbeta).for_each(|(a, v)| *a += v);
        p.mark_fresh();
        Ok(dx)
    }
}

impl Parameterized for BatchNorm {
    fn params(&self) -> Vec<&LayerParams> {
        vec![&self.state.affine]
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.state.affine]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rows_collapse_to_beta() {
        let mut s = BatchNormState::new(3);
        s.affine.bias = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let x = Tensor::from_rows(&vec![vec![1.0, 2.0, 3.0]; 4]).unwrap();
        let y = batch_norm_masked(&x, &[true; 4], &mut s).unwrap();
        for r in 0..4 {
            assert_eq!(y.row(r), &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn absent_rows_are_exact_zero_and_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let full = Tensor::randn(&[5, 4], 2.0, &mut rng);
        let present = [true, false, true, true, false];
        let mut s1 = BatchNormState::new(4);
        s1.affine.weights = Tensor::randn(&[4], 1.0, &mut rng);
        s1.affine.bias = Tensor::randn(&[4], 1.0, &mut rng);
        let mut s2 = s1.clone();
        let y = batch_norm_masked(&full, &present, &mut s1).unwrap();
        let sub = full.select_rows(&[0, 2, 3]).unwrap();
        let ys = batch_norm_masked(&sub, &[true; 3], &mut s2).unwrap();
        for (k, r) in [0, 2, 3].into_iter().enumerate() {
            assert_eq!(y.row(r), ys.row(k));
        }
        assert!(y.row(1).iter().chain(y.row(4)).all(|&v| v == 0.0));
        assert_eq!(s1.running_mean, s2.running_mean);
        assert_eq!(s1.running_var, s2.running_var);
    }

    #[test]
    fn train_mode_requires_a_present_row() {
        let mut s = BatchNormState::new(2);
        let err = batch_norm_masked(&Tensor::zeros(&[2, 2]), &[false, false], &mut s);
        assert!(matches!(err, Err(Error::MaskExhausted(_))));
        s.mode = Mode::Infer;
        let y = batch_norm_masked(&Tensor::zeros(&[2, 2]), &[false, false], &mut s).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infer_uses_running_stats() {
        let mut s = BatchNormState::new(1);
        s.running_mean = vec![2.0];
        s.running_var = vec![4.0 - DEFAULT_EPSILON];
        s.mode = Mode::Infer;
        let x = Tensor::new(vec![2, 1], vec![6.0, 0.0]).unwrap();
        let y = batch_norm_masked(&x, &[true, false], &mut s).unwrap();
        assert!((y.data()[0] - 2.0).abs() < 1e-12);
        assert_eq!(y.data()[1], 0.0);
    }
}
