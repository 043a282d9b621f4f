use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{LayerParams, Parameterized, Tensor};

/// `y = x·W + b` for every row of `x`; `W` is `[din, dout]`.
pub fn dense_forward(x: &Tensor, p: &LayerParams) -> Result<Tensor> {
    let (din, dout) = dims(p);
    if x.ndim() != 2 || x.dim(1) != din {
        return Err(Error::dim(format!(
            "dense input {:?} does not match weights {:?}",
            x.shape(),
            p.weights.shape()
        )));
    }
    let batch = x.dim(0);
    let w = p.weights.data();
    let mut out = Vec::with_capacity(batch * dout);
    for r in 0..batch {
        let mut acc = p.bias.data().to_vec();
        for (i, &xi) in x.row(r).iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let wrow = &w[i * dout..(i + 1) * dout];
            acc.iter_mut().zip(wrow).for_each(|(a, &wv)| *a += xi * wv);
        }
        out.extend(acc);
    }
    Tensor::new(vec![batch, dout], out)
}

fn dims(p: &LayerParams) -> (usize, usize) {
    let s = p.weights.shape();
    (s[0], s[1])
}

/// Fully connected layer with a cached input for backprop.
#[derive(Debug, Clone)]
pub struct Dense {
    pub params: LayerParams,
    input: Option<Tensor>,
}

impl Dense {
    /// He-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(din: usize, dout: usize, rng: &mut R) -> Self {
        let limit = (6.0 / din as f64).sqrt();
        let weights = Tensor::uniform(&[din, dout], limit, rng);
        Self::from_params(LayerParams::new(weights, Tensor::zeros(&[dout])))
    }

    pub fn from_params(params: LayerParams) -> Self {
        Self {
            params,
            input: None,
        }
    }

    pub fn din(&self) -> usize {
        self.params.weights.dim(0)
    }

    pub fn dout(&self) -> usize {
        self.params.weights.dim(1)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = dense_forward(x, &self.params)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("dense backward before forward".into()))?;
        let (din, dout) = dims(&self.params);
        let batch = x.dim(0);
        if dy.shape() != [batch, dout] {
            return Err(Error::dim(format!(
                "dense upstream gradient {:?}, expected [{batch}, {dout}]",
                dy.shape()
            )));
        }
        let w = self.params.weights.data();
        let mut dx = vec![0.0; batch * din];
        {
            let gw = self.params.grad_weights.data_mut();
            for r in 0..batch {
                let xr = x.row(r);
                let dyr = dy.row(r);
                for i in 0..din {
                    let xi = xr[i];
                    let wrow = &w[i * dout..(i + 1) * dout];
                    let gwrow = &mut gw[i * dout..(i + 1) * dout];
                    let mut s = 0.0;
                    for o in 0..dout {
                        gwrow[o] += xi * dyr[o];
                        s += dyr[o] * wrow[o];
                    }
                    dx[r * din + i] = s;
                }
            }
        }
        let gb = self.params.grad_bias.data_mut();
        for r in 0..batch {
            gb.iter_mut().zip(dy.row(r)).for_each(|(g, &d)| *g += d);
        }
        self.params.mark_fresh();
        Tensor::new(vec![batch, din], dx)
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&LayerParams> {
        vec![&self.params]
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.params]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
        let (bsz, din, dout) = (x.dim(0), w.dim(0), w.dim(1));
        let mut out = vec![0.0; bsz * dout];
        for r in 0..bsz {
            for o in 0..dout {
                let mut s = b.data()[o];
                for i in 0..din {
                    s += x.data()[r * din + i] * w.data()[i * dout + o];
                }
                out[r * dout + o] = s;
            }
        }
        out
    }

    #[test]
    fn identity_weights() {
        let x = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = LayerParams::new(w, Tensor::zeros(&[2]));
        assert_eq!(dense_forward(&x, &p).unwrap().data(), &[1.0, 0.0]);
    }

    #[test]
    fn hand_sum() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let p = LayerParams::new(w, Tensor::new(vec![1], vec![3.0]).unwrap());
        assert_eq!(dense_forward(&x, &p).unwrap().data(), &[6.0]);
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::randn(&[4, 5], 1.0, &mut rng);
        let w = Tensor::randn(&[5, 3], 1.0, &mut rng);
        let b = Tensor::randn(&[3], 1.0, &mut rng);
        let expected = naive_matmul(&x, &w, &b);
        let y = dense_forward(&x, &LayerParams::new(w, b)).unwrap();
        for (a, e) in y.data().iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let x = Tensor::zeros(&[2, 4]);
        let p = LayerParams::new(Tensor::zeros(&[3, 2]), Tensor::zeros(&[2]));
        let err = dense_forward(&x, &p).unwrap_err().to_string();
        assert!(err.contains("[2, 4]") && err.contains("[3, 2]"), "{err}");
    }
}
