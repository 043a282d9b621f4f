use crate::error::{Error, Result};
use crate::numcore::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    active: Vec<bool>,
    shape: Vec<usize>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.active = x.data().iter().map(|&v| v > 0.0).collect();
        self.shape = x.shape().to_vec();
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        y
    }

    pub fn backward(&self, dy: &Tensor) -> Result<Tensor> {
        if dy.shape() != self.shape.as_slice() {
            return Err(Error::dim(format!(
                "relu upstream gradient {:?}, expected {:?}",
                dy.shape(),
                self.shape
            )));
        }
        let mut dx = dy.clone();
        dx.data_mut()
            .iter_mut()
            .zip(&self.active)
            .for_each(|(g, &on)| {
                if !on {
                    *g = 0.0
                }
            });
        Ok(dx)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a `[B, K]` tensor, max-subtracted.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    if logits.ndim() != 2 {
        return Err(Error::dim(format!("softmax expects [B, K], got {:?}", logits.shape())));
    }
    let mut out = logits.clone();
    for r in 0..logits.dim(0) {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    Ok(out)
}

/// Row-wise L2 normalization with cached norms for backprop.
///
/// All-zero rows pass through unchanged and receive zero gradient.
#[derive(Debug, Clone, Default)]
pub struct L2Normalize {
    output: Option<Tensor>,
    norms: Vec<f64>,
}

impl L2Normalize {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 {
            return Err(Error::dim(format!("l2 normalize expects [B, d], got {:?}", x.shape())));
        }
        let mut y = x.clone();
        self.norms.clear();
        for r in 0..x.dim(0) {
            let row = y.row_mut(r);
            let n = l2_normalize_in_place(row);
            self.norms.push(n);
        }
        self.output = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&self, dy: &Tensor) -> Result<Tensor> {
        let y = self
            .output
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("l2 backward before forward".into()))?;
        if dy.shape() != y.shape() {
            return Err(Error::dim(format!(
                "l2 upstream gradient {:?}, expected {:?}",
                dy.shape(),
                y.shape()
            )));
        }
        let mut dx = Tensor::zeros(y.shape());
        for r in 0..y.dim(0) {
            let n = self.norms[r];
            if n == 0.0 {
                continue;
            }
            let (yr, gr) = (y.row(r), dy.row(r));
            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for (d, (&yv, &g)) in dx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                *d = (g - yv * dot) / n;
            }
        }
        Ok(dx)
    }
}

/// Scales `v` to unit L2 norm, returning the original norm; zero stays zero.
pub fn l2_normalize_in_place(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}
