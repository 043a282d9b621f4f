//! Central finite-difference verification of analytic gradients.
//!
//! Each sampled coordinate is probed at `x - h`, `x`, `x + h`. If the one-sided
//! slopes disagree by more than `kink_tolerance` the coordinate sits on a
//! non-differentiable point (a max-pool tie, a ReLU hinge) and is reported as
//! skipped instead of compared.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::{Parameterized, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Upper bound on probed coordinates; 0 means all of them.
    pub max_samples: usize,
    pub kink_tolerance: f64,
    /// Gradients below this magnitude are compared absolutely.
    pub magnitude_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_samples: 0,
            kink_tolerance: 1e-2,
            magnitude_floor: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    /// Flat coordinate with the largest error.
    pub worst_index: Option<usize>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < self.tolerance
    }

    /// Folds another report into this one (used for multi-part checks).
    pub fn merge(&mut self, other: &GradCheckReport) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst_index = other.worst_index;
        }
        self.tolerance = self.tolerance.min(other.tolerance);
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic[i]` with central differences of `eval(i, delta)`,
/// which must return the loss with coordinate `i` shifted by `delta`.
pub fn check_coordinates<F>(analytic: &[f64], mut eval: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    F: FnMut(usize, f64) -> f64,
{
    let n = analytic.len();
    let mut idx: Vec<usize> = if cfg.max_samples == 0 || cfg.max_samples >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        sample(&mut rng, n, cfg.max_samples).into_vec()
    };
    idx.sort_unstable();

    let h = cfg.step;
    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst_index: None,
        tolerance: cfg.tolerance,
    };
    for i in idx {
        let f0 = eval(i, 0.0);
        let fp = eval(i, h);
        let fm = eval(i, -h);
        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        let scale = fwd.abs().max(bwd.abs()).max(1.0);
        if (fwd - bwd).abs() > cfg.kink_tolerance * scale {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let err = relative_error(analytic[i], numeric, cfg.magnitude_floor);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}

/// Checks the gradient buffers of `model` (filled by a prior backward pass)
/// against finite differences of `loss`.
pub fn gradient_check<M, F>(model: &mut M, mut loss: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    M: Parameterized + ?Sized,
    F: FnMut(&mut M) -> f64,
{
    let mut layout = Vec::new();
    let mut analytic = Vec::new();
    for (pi, p) in model.params().into_iter().enumerate() {
        for j in 0..p.num_values() {
            layout.push((pi, j));
            analytic.push(p.grad(j));
        }
    }
    check_coordinates(
        &analytic,
        |i, delta| {
            let (pi, j) = layout[i];
            let orig = model.params()[pi].value(j);
            model.params_mut()[pi].set_value(j, orig + delta);
            let l = loss(model);
            model.params_mut()[pi].set_value(j, orig);
            l
        },
        cfg,
    )
}

/// Checks an input gradient of a scalar function of one tensor.
pub fn gradient_check_input<F>(
    x: &Tensor,
    analytic: &Tensor,
    mut f: F,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    F: FnMut(&Tensor) -> f64,
{
    let mut probe = x.clone();
    check_coordinates(
        analytic.data(),
        |i, delta| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + delta;
            let l = f(&probe);
            probe.data_mut()[i] = orig;
            l
        },
        cfg,
    )
}
