use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{LayerParams, Parameterized, Tensor};

pub const DEFAULT_KERNEL: usize = 7;

/// Same-padded 1-D convolution along the last axis of a `[B, T, L]` tensor.
///
/// Every timestep is filtered independently with one shared kernel, so the
/// output shape equals the input shape. Weights are `[kernel]`, bias `[1]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub params: LayerParams,
    length: usize,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(length: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::param(format!("conv1d kernel must be odd, got {kernel}")));
        }
        let limit = (3.0 / kernel as f64).sqrt();
        let mut w = Tensor::uniform(&[kernel], limit, rng);
        // Start near a pass-through filter.
        w.data_mut()[kernel / 2] += 1.0;
        Ok(Self::from_params(LayerParams::new(w, Tensor::zeros(&[1])), length))
    }

    pub fn from_params(params: LayerParams, length: usize) -> Self {
        Self {
            params,
            length,
            input: None,
        }
    }

    pub fn kernel(&self) -> usize {
        self.params.weights.len()
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = conv1d_forward(x, &self.params, self.length)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("conv1d backward before forward".into()))?;
        if dy.shape() != x.shape() {
            return Err(Error::dim(format!(
                "conv1d upstream gradient {:?}, expected {:?}",
                dy.shape(),
                x.shape()
            )));
        }
        let len = self.length;
        let k = self.kernel();
        let half = (k / 2) as isize;
        let w = self.params.weights.data().to_vec();
        let mut gw = vec![0.0; k];
        let mut gb = 0.0;
        let mut dx = vec![0.0; x.len()];
        for (row, (xs, dys)) in x.data().chunks(len).zip(dy.data().chunks(len)).enumerate() {
            let dxs = &mut dx[row * len..(row + 1) * len];
            for i in 0..len {
                let g = dys[i];
                if g == 0.0 {
                    continue;
                }
                gb += g;
                for (j, &wj) in w.iter().enumerate() {
                    let src = i as isize + j as isize - half;
                    if src >= 0 && (src as usize) < len {
                        gw[j] += g * xs[src as usize];
                        dxs[src as usize] += g * wj;
                    }
                }
            }
        }
        self.params
            .grad_weights
            .data_mut()
            .iter_mut()
            .zip(&gw)
            .for_each(|(a, b)| *a += b);
        self.params.grad_bias.data_mut()[0] += gb;
        self.params.mark_fresh();
        Tensor::new(x.shape().to_vec(), dx)
    }
}

impl Parameterized for Conv1d {
    fn params(&self) -> Vec<&LayerParams> {
        vec![&self.params]
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.params]
    }
}

/// Stateless forward pass; `length` is the required size of the last axis.
pub fn conv1d_forward(x: &Tensor, p: &LayerParams, length: usize) -> Result<Tensor> {
    if x.ndim() != 3 || x.dim(2) != length {
        return Err(Error::dim(format!(
            "conv1d expects [B, T, {length}], got {:?}",
            x.shape()
        )));
    }
    let w = p.weights.data();
    let bias = p.bias.data()[0];
    let half = (w.len() / 2) as isize;
    let mut out = Vec::with_capacity(x.len());
    for xs in x.data().chunks(length) {
        for i in 0..length {
            let mut s = bias;
            for (j, &wj) in w.iter().enumerate() {
                let src = i as isize + j as isize - half;
                if src >= 0 && (src as usize) < length {
                    s += wj * xs[src as usize];
                }
            }
            out.push(s);
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot_kernel(k: usize) -> LayerParams {
        let mut w = Tensor::zeros(&[k]);
        w.data_mut()[k / 2] = 1.0;
        LayerParams::new(w, Tensor::zeros(&[1]))
    }

    #[test]
    fn identity_kernel_passes_spike() {
        let mut x = Tensor::zeros(&[1, 1, 300]);
        x.data_mut()[137] = 1.0;
        let y = conv1d_forward(&x, &one_hot_kernel(7), 300).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LayerParams::new(Tensor::randn(&[7], 1.0, &mut rng), Tensor::zeros(&[1]));
        let y = conv1d_forward(&Tensor::zeros(&[2, 3, 300]), &p, 300).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::randn(&[2, 3, 300], 1.0, &mut rng);
        let p = LayerParams::new(
            Tensor::randn(&[7], 1.0, &mut rng),
            Tensor::randn(&[1], 1.0, &mut rng),
        );
        let y = conv1d_forward(&x, &p, 300).unwrap();
        let (w, b) = (p.weights.data(), p.bias.data()[0]);
        for bi in 0..2 {
            for t in 0..3 {
                for i in 0..300i64 {
                    let mut s = b;
                    for j in 0..7i64 {
                        let src = i + j - 3;
                        if (0..300).contains(&src) {
                            s += w[j as usize] * x.data()[(bi * 3 + t) * 300 + src as usize];
                        }
                    }
                    let got = y.data()[(bi * 3 + t) * 300 + i as usize];
                    assert!((got - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wrong_length_is_dimension_error() {
        let p = one_hot_kernel(7);
        assert!(matches!(
            conv1d_forward(&Tensor::zeros(&[1, 3, 299]), &p, 300),
            Err(Error::Dimension(_))
        ));
    }
}
