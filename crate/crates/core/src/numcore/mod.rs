//! Small tensor/layer/loss/optimizer engine with hand-written backward passes.
//!
//! All math is `f64`. Layers cache what their backward pass needs during
//! `forward`, accumulate parameter gradients in `backward`, and flag them
//! fresh so the optimizer can refuse to re-apply a consumed gradient.

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod checkpoint;
pub mod conv1d;
pub mod conv2d;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod params;
pub mod pool;
pub mod tensor;

pub use activation::{l2_normalize_in_place, sigmoid, softmax_rows, L2Normalize, Relu};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::{batch_norm_masked, BatchNorm, BatchNormState, Mode};
pub use conv1d::{conv1d_forward, Conv1d};
pub use conv2d::Conv2d;
pub use dense::{dense_forward, Dense};
pub use gradcheck::{gradient_check, gradient_check_input, GradCheckConfig, GradCheckReport};
pub use loss::{binary_cross_entropy, joint_loss, softmax_cross_entropy};
pub use params::{GradState, LayerParams, Parameterized};
pub use pool::{global_avg_pool, max_pool_time, GlobalAvgPool, MaxPoolTime};
pub use tensor::Tensor;
