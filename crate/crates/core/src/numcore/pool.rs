use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Global max over the time axis: `[B, T, C] -> [B, C]`.
///
/// Ties resolve to the first timestep, and backward routes the whole
/// gradient to that position.
#[derive(Debug, Clone, Default)]
pub struct MaxPoolTime {
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
}

impl MaxPoolTime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, argmax) = max_pool_time(x)?;
        self.argmax = argmax;
        self.input_shape = x.shape().to_vec();
        Ok(y)
    }

    pub fn backward(&self, dy: &Tensor) -> Result<Tensor> {
        if self.input_shape.is_empty() {
            return Err(Error::EmptyInput("max-pool backward before forward".into()));
        }
        let (b, t, c) = (self.input_shape[0], self.input_shape[1], self.input_shape[2]);
        if dy.shape() != [b, c] {
            return Err(Error::dim(format!(
                "max-pool upstream gradient {:?}, expected [{b}, {c}]",
                dy.shape()
            )));
        }
        let mut dx = vec![0.0; b * t * c];
        for bi in 0..b {
            for ci in 0..c {
                let ti = self.argmax[bi * c + ci];
                dx[(bi * t + ti) * c + ci] = dy.data()[bi * c + ci];
            }
        }
        Tensor::new(self.input_shape.clone(), dx)
    }

    /// Timestep chosen for each output element in the last forward pass.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Returns the pooled tensor and the winning timestep per `(b, c)`.
pub fn max_pool_time(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if x.ndim() != 3 {
        return Err(Error::dim(format!("max-pool expects [B, T, C], got {:?}", x.shape())));
    }
    let (b, t, c) = (x.dim(0), x.dim(1), x.dim(2));
    if t == 0 {
        return Err(Error::EmptyInput("max-pool over zero timesteps".into()));
    }
    let d = x.data();
    let mut out = Vec::with_capacity(b * c);
    let mut arg = Vec::with_capacity(b * c);
    for bi in 0..b {
        for ci in 0..c {
            let mut best = d[bi * t * c + ci];
            let mut best_t = 0;
            for ti in 1..t {
                let v = d[(bi * t + ti) * c + ci];
                if v > best {
                    best = v;
                    best_t = ti;
                }
            }
            out.push(best);
            arg.push(best_t);
        }
    }
    Ok((Tensor::new(vec![b, c], out)?, arg))
}

/// Spatial mean per channel: `[B, C, H, W] -> [B, C]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    input_shape: Vec<usize>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = global_avg_pool(x)?;
        self.input_shape = x.shape().to_vec();
        Ok(y)
    }

    pub fn backward(&self, dy: &Tensor) -> Result<Tensor> {
        if self.input_shape.is_empty() {
            return Err(Error::EmptyInput("avg-pool backward before forward".into()));
        }
        let (b, c) = (self.input_shape[0], self.input_shape[1]);
        if dy.shape() != [b, c] {
            return Err(Error::dim(format!(
                "avg-pool upstream gradient {:?}, expected [{b}, {c}]",
                dy.shape()
            )));
        }
        let area = self.input_shape[2] * self.input_shape[3];
        let scale = 1.0 / area as f64;
        let mut dx = Vec::with_capacity(b * c * area);
        for &g in dy.data() {
            dx.extend(std::iter::repeat_n(g * scale, area));
        }
        Tensor::new(self.input_shape.clone(), dx)
    }
}

pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    if x.ndim() != 4 {
        return Err(Error::dim(format!(
            "global average pool expects [B, C, H, W], got {:?}",
            x.shape()
        )));
    }
    let (b, c, area) = (x.dim(0), x.dim(1), x.dim(2) * x.dim(3));
    let out = x
        .data()
        .chunks(area)
        .map(|plane| plane.iter().sum::<f64>() / area as f64)
        .collect();
    Tensor::new(vec![b, c], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_timestep_is_identity() {
        let x = Tensor::new(vec![1, 1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let (y, _) = max_pool_time(&x).unwrap();
        assert_eq!(y.data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn picks_max_over_time() {
        let x = Tensor::new(vec![1, 3, 1], vec![1.0, 5.0, 2.0]).unwrap();
        let (y, arg) = max_pool_time(&x).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn ties_go_to_first_index() {
        let x = Tensor::new(vec![1, 3, 1], vec![4.0, 4.0, 4.0]).unwrap();
        let mut pool = MaxPoolTime::new();
        pool.forward(&x).unwrap();
        let dx = pool.backward(&Tensor::filled(&[1, 1], 1.0)).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::randn(&[3, 4, 6], 1.0, &mut rng);
        let (y, _) = max_pool_time(&x).unwrap();
        for b in 0..3 {
            for c in 0..6 {
                let m = (0..4)
                    .map(|t| x.data()[(b * 4 + t) * 6 + c])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(y.data()[b * 6 + c], m);
            }
        }
    }

    #[test]
    fn zero_timesteps_rejected() {
        // Tensor forbids zero extents, so the only way to get T == 0 is a
        // malformed shape; the constructor already refuses it.
        assert!(Tensor::new(vec![1, 0, 3], vec![]).is_err());
    }

    #[test]
    fn avg_pool_hand_values() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[2.5]);
    }

    #[test]
    fn avg_pool_matches_loop_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(&[2, 3, 5, 4], 1.0, &mut rng);
        let y = global_avg_pool(&x).unwrap();
        for b in 0..2 {
            for c in 0..3 {
                let mut s = 0.0;
                for i in 0..20 {
                    s += x.data()[(b * 3 + c) * 20 + i];
                }
                assert!((y.data()[b * 3 + c] - s / 20.0).abs() < 1e-12);
            }
        }
    }
}
