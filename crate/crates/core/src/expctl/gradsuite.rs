//! Finite-difference checks of every layer, both losses and the full fused
//! network at tiny dimensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ecg::EcgInput;
use crate::error::Result;
use crate::fusion::{FusedModel, ModalityMask, ModelConfig, MultimodalSample, TaskMode};
use crate::numcore::{
    binary_cross_entropy, softmax_cross_entropy, BatchNorm, Conv1d, Conv2d, Dense, GlobalAvgPool,
    GradCheckConfig, GradCheckReport, L2Normalize, MaxPoolTime, Mode, Parameterized, Relu, Tensor,
    gradient_check, gradient_check_input,
};
use crate::vision::{ExtractorConfig, Image};

#[derive(Debug, Clone, PartialEq)]
pub struct GradSuiteEntry {
    pub name: String,
    pub report: GradCheckReport,
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks parameter and input gradients of a layer under the scalar
/// `L = <layer(x), r>` for a fixed random `r`.
fn layer_checks<L, F, B>(
    name: &str,
    layer: &mut L,
    x: &Tensor,
    mut forward: F,
    backward: B,
    cfg: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<GradSuiteEntry>,
) -> Result<()>
where
    L: Parameterized + Clone,
    F: FnMut(&mut L, &Tensor) -> Result<Tensor>,
    B: FnOnce(&mut L, &Tensor) -> Result<Tensor>,
{
    let y = forward(layer, x)?;
    let r = Tensor::randn(y.shape(), 1.0, rng);
    layer.zero_grad();
    let dx = backward(layer, &r)?;
    let mut probe = layer.clone();
    let input = gradient_check_input(x, &dx, |t| dot(&forward(&mut probe, t).expect("forward"), &r), cfg);
    out.push(GradSuiteEntry {
        name: format!("{name}/input"),
        report: input,
    });
    if layer.num_values() > 0 {
        let params = gradient_check(layer, |l| dot(&forward(l, x).expect("forward"), &r), cfg);
        out.push(GradSuiteEntry {
            name: format!("{name}/params"),
            report: params,
        });
    }
    Ok(())
}

/// Parameter-free layers get a throwaway [`Parameterized`] shell.
#[derive(Clone)]
struct Stateless<T>(T);

impl<T> Parameterized for Stateless<T> {
    fn params(&self) -> Vec<&crate::numcore::LayerParams> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut crate::numcore::LayerParams> {
        Vec::new()
    }
}

fn tiny_model_config(subjects: usize) -> ModelConfig {
    ModelConfig {
        trunk: vec![6],
        image: ExtractorConfig {
            input_width: 8,
            input_height: 8,
            channels: vec![2, 3],
            kernel: 3,
        },
        ..ModelConfig::new(subjects)
    }
}

fn random_sample(rng: &mut ChaCha8Rng, label: usize, keep: ModalityMask) -> Result<MultimodalSample> {
    let ecg = EcgInput::new((0..900).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let mut img = || Image::new(8, 8, (0..64).map(|_| rng.random_range(0.0..1.0)).collect());
    let (face, finger) = (img()?, img()?);
    MultimodalSample::new(Some(ecg), Some(face), Some(finger), label, (label % 2) as u8)?.restricted(keep)
}

/// Runs the whole suite; every entry should report `passed()`.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradSuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GradCheckConfig {
        seed,
        ..GradCheckConfig::default()
    };
    let mut out = Vec::new();

    let x = Tensor::randn(&[3, 5], 1.0, &mut rng);
    let mut dense = Dense::new(5, 4, &mut rng);
    layer_checks("dense", &mut dense, &x, |l, t| l.forward(t), |l, g| l.backward(g), &cfg, &mut rng, &mut out)?;

    let x = Tensor::randn(&[2, 3, 11], 1.0, &mut rng);
    let mut conv1 = Conv1d::new(11, 5, &mut rng)?;
    layer_checks("conv1d", &mut conv1, &x, |l, t| l.forward(t), |l, g| l.backward(g), &cfg, &mut rng, &mut out)?;

    let x = Tensor::randn(&[2, 2, 7, 6], 1.0, &mut rng);
    let mut conv2 = Conv2d::new(2, 3, 3, 2, 1, &mut rng)?;
    layer_checks("conv2d", &mut conv2, &x, |l, t| l.forward(t), |l, g| l.backward(g), &cfg, &mut rng, &mut out)?;

    let x = Tensor::randn(&[3, 4], 1.0, &mut rng);
    let mut relu = Stateless(Relu::new());
    layer_checks(
        "relu",
        &mut relu,
        &x,
        |l, t| Ok(l.0.forward(t)),
        |l, g| l.0.backward(g),
        &cfg,
        &mut rng,
        &mut out,
    )?;

    let x = Tensor::randn(&[2, 5, 3], 1.0, &mut rng);
    let mut pool = Stateless(MaxPoolTime::new());
    layer_checks(
        "max_pool_time",
        &mut pool,
        &x,
        |l, t| l.0.forward(t),
        |l, g| l.0.backward(g),
        &cfg,
        &mut rng,
        &mut out,
    )?;

    let x = Tensor::randn(&[2, 3, 4, 4], 1.0, &mut rng);
    let mut gap = Stateless(GlobalAvgPool::new());
    layer_checks(
        "global_avg_pool",
        &mut gap,
        &x,
        |l, t| l.0.forward(t),
        |l, g| l.0.backward(g),
        &cfg,
        &mut rng,
        &mut out,
    )?;

    let x = Tensor::randn(&[3, 6], 1.0, &mut rng);
    let mut l2 = Stateless(L2Normalize::new());
    layer_checks(
        "l2_normalize",
        &mut l2,
        &x,
        |l, t| l.0.forward(t),
        |l, g| l.0.backward(g),
        &cfg,
        &mut rng,
        &mut out,
    )?;

    let present = [true, false, true, true, false];
    for mode in [Mode::Train, Mode::Infer] {
        let x = Tensor::randn(&[5, 4], 1.0, &mut rng);
        let mut bn = BatchNorm::new(4);
        bn.state.running_mean = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        bn.state.running_var = (0..4).map(|_| rng.random_range(0.5..2.0)).collect();
        for v in bn.state.affine.weights.data_mut() {
            *v = rng.random_range(0.5..1.5);
        }
        bn.set_mode(mode);
        // Train mode updates running statistics on every call; they do not
        // feed back into train-mode outputs, so repeated probes agree.
        let name = match mode {
            Mode::Train => "batchnorm_masked/train",
            Mode::Infer => "batchnorm_masked/infer",
        };
        layer_checks(
            name,
            &mut bn,
            &x,
            |l, t| l.forward(t, &present),
            |l, g| l.backward(g),
            &cfg,
            &mut rng,
            &mut out,
        )?;
    }

    let logits = Tensor::randn(&[4, 5], 2.0, &mut rng);
    let labels = [0, 3, 4, 3];
    let (_, g) = softmax_cross_entropy(&logits, &labels)?;
    out.push(GradSuiteEntry {
        name: "softmax_cross_entropy".into(),
        report: gradient_check_input(
            &logits,
            &g,
            |t| softmax_cross_entropy(t, &labels).expect("ce").0,
            &cfg,
        ),
    });

    let logits = Tensor::randn(&[4, 1], 2.0, &mut rng);
    let labels = [0u8, 1, 1, 0];
    let (_, g) = binary_cross_entropy(&logits, &labels)?;
    out.push(GradSuiteEntry {
        name: "binary_cross_entropy".into(),
        report: gradient_check_input(
            &logits,
            &g,
            |t| binary_cross_entropy(t, &labels).expect("bce").0,
            &cfg,
        ),
    });

    // Full network: a mixed-availability batch so masked paths are exercised.
    let masks: [ModalityMask; 5] = [
        ModalityMask::ALL,
        ModalityMask::new(true, false, true),
        ModalityMask::new(false, true, true),
        ModalityMask::new(true, true, false),
        ModalityMask::ALL,
    ];
    let batch = masks
        .iter()
        .enumerate()
        .map(|(i, &m)| random_sample(&mut rng, i % 3, m))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&MultimodalSample> = batch.iter().collect();
    for task in TaskMode::ALL {
        let mut model = FusedModel::new(
            ModelConfig {
                task_mode: task,
                ..tiny_model_config(3)
            },
            seed,
        )?;
        model.zero_grad();
        let logits = model.forward(&refs, ModalityMask::ALL, Mode::Train)?;
        let (_, grads) = model.loss(&logits, &refs)?;
        model.backward(&grads)?;
        let net_cfg = GradCheckConfig {
            max_samples: 600,
            ..cfg
        };
        let report = gradient_check(
            &mut model,
            |m| {
                let l = m.forward(&refs, ModalityMask::ALL, Mode::Train).expect("forward");
                m.loss(&l, &refs).expect("loss").0.total
            },
            &net_cfg,
        );
        out.push(GradSuiteEntry {
            name: format!("fused_network/{task}"),
            report,
        });
    }
    Ok(out)
}
