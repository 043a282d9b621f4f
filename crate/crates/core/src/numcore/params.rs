use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Where a parameter's gradient buffer is in the backward/step cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradState {
    /// Zeroed, nothing accumulated since.
    Empty,
    /// Written by a backward pass and not yet applied.
    Fresh,
    /// Already applied by an optimizer step.
    Consumed,
}

/// Weight/bias pair with gradient buffers of identical shape.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub grad_weights: Tensor,
    pub grad_bias: Tensor,
    grad_state: GradState,
}

impl LayerParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Self {
        let grad_weights = Tensor::zeros(weights.shape());
        let grad_bias = Tensor::zeros(bias.shape());
        Self {
            weights,
            bias,
            grad_weights,
            grad_bias,
            grad_state: GradState::Empty,
        }
    }

    pub fn grad_state(&self) -> GradState {
        self.grad_state
    }

    /// Called by backward passes after accumulating into the gradient buffers.
    pub fn mark_fresh(&mut self) {
        self.grad_state = GradState::Fresh;
    }

    pub(crate) fn mark_consumed(&mut self) {
        self.grad_state = GradState::Consumed;
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
        self.grad_bias.fill(0.0);
        self.grad_state = GradState::Empty;
    }

    pub fn num_values(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Flat view: weights first, then bias.
    pub fn value(&self, i: usize) -> f64 {
        let nw = self.weights.len();
        if i < nw {
            self.weights.data()[i]
        } else {
            self.bias.data()[i - nw]
        }
    }

    pub fn set_value(&mut self, i: usize, v: f64) {
        let nw = self.weights.len();
        if i < nw {
            self.weights.data_mut()[i] = v;
        } else {
            self.bias.data_mut()[i - nw] = v;
        }
    }

    pub fn grad(&self, i: usize) -> f64 {
        let nw = self.weights.len();
        if i < nw {
            self.grad_weights.data()[i]
        } else {
            self.grad_bias.data()[i - nw]
        }
    }

    pub fn grads_are_zero(&self) -> bool {
        self.grad_weights.data().iter().all(|&g| g == 0.0)
            && self.grad_bias.data().iter().all(|&g| g == 0.0)
    }

    pub(crate) fn check_fresh(&self, name: &str) -> Result<()> {
        match self.grad_state {
            GradState::Fresh => Ok(()),
            GradState::Empty => Err(Error::StaleGradient(format!("{name}: no backward since zero_grad"))),
            GradState::Consumed => Err(Error::StaleGradient(format!("{name}: gradient already applied"))),
        }
    }
}

/// Anything owning trainable parameters, visited in a stable order.
pub trait Parameterized {
    fn params(&self) -> Vec<&LayerParams>;
    fn params_mut(&mut self) -> Vec<&mut LayerParams>;

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(LayerParams::zero_grad);
    }

    fn num_values(&self) -> usize {
        self.params().iter().map(|p| p.num_values()).sum()
    }
}

impl Parameterized for LayerParams {
    fn params(&self) -> Vec<&LayerParams> {
        vec![self]
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![self]
    }
}
