//! Multimodal (ECG, face, fingerprint) multitask identification.
//!
//! - [`numcore`]: tensors, layers, losses, Adam, gradient checking
//! - [`ecg`]: resampling, R-peak detection, QRS segmentation
//! - [`vision`]: image ingestion, augmentation, pepper noise, CNN features
//! - [`fusion`]: masked feature-level fusion network and score-level fusion
//! - [`dataset`]: virtual subjects, expansion, splits, noise protocols
//! - [`expctl`]: experiment configs, sweeps and reports

pub mod error;
pub mod numcore;

pub use error::{Error, Result};
pub mod dataset;
pub mod ecg;
pub mod expctl;
pub mod fusion;
pub mod types;
pub mod vision;

pub use types::{Gender, Modality};
