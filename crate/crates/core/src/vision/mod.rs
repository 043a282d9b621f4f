//! Face and fingerprint images: ingestion, standardization, augmentation,
//! pepper noise and the trainable CNN feature extractor.

mod features;
mod image;
pub mod io;
mod transform;

pub use features::{
    extract_features, images_to_tensor, project, ExtractorConfig, FeatureVector, ImageBranch,
    ImageExtractor,
};
pub use image::Image;
pub use io::load_image;
pub use transform::{
    augment, crop, pepper_count, pepper_noise, rotate, standardize, translate, AugmentParams,
};
