use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{LayerParams, Parameterized};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

impl Moments {
    fn for_params(p: &LayerParams) -> Self {
        Self {
            m_w: vec![0.0; p.weights.len()],
            v_w: vec![0.0; p.weights.len()],
            m_b: vec![0.0; p.bias.len()],
            v_b: vec![0.0; p.bias.len()],
        }
    }
}

/// Adam with bias correction. Moments are matched to parameters by the
/// visiting order of [`Parameterized::params_mut`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter. Every parameter must carry a
    /// fresh gradient; otherwise nothing is modified.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let mut params = model.params_mut();
        for (i, p) in params.iter().enumerate() {
            p.check_fresh(&format!("parameter group {i}"))?;
        }
        if self.moments.is_empty() {
            self.moments = params.iter().map(|p| Moments::for_params(p)).collect();
        } else if self.moments.len() != params.len() {
            return Err(Error::dim(format!(
                "optimizer tracks {} parameter groups, model has {}",
                self.moments.len(),
                params.len()
            )));
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (p, mom) in params.iter_mut().zip(&mut self.moments) {
            update(
                p.weights.data_mut(),
                p.grad_weights.data(),
                &mut mom.m_w,
                &mut mom.v_w,
                &c,
                bc1,
                bc2,
            );
            update(
                p.bias.data_mut(),
                p.grad_bias.data(),
                &mut mom.m_b,
                &mut mom.v_b,
                &c,
                bc1,
                bc2,
            );
            p.mark_consumed();
        }
        Ok(())
    }
}

fn update(
    w: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    c: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..w.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        let mh = m[i] / bc1;
        let vh = v[i] / bc2;
        w[i] -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
    }
}
