//! Virtual multimodal dataset construction.
//!
//! Single-modality source pools (ECG subjects, face identities, fingerprint
//! identities) are paired into virtual subjects by gender and age, expanded
//! to a fixed number of samples per subject, split 80/20 per subject and
//! optionally corrupted by a noise protocol. A synthetic source generator
//! stands in for the real databases.

mod build;
mod expand;
mod matching;
mod noise;
mod sources;
mod split;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::ecg::QrsComplex;
use crate::types::Gender;
use crate::vision::Image;

pub use build::{build_dataset, DataSource, Dataset, DatasetConfig, DatasetManifest, SubjectEntry};
pub use expand::{
    enumerate_triples, expand_samples, realize_samples, EcgDraw, ExpandConfig, ExpandedPools,
    ImageDraw,
};
pub use matching::{build_virtual_subjects, MatchConfig};
pub use noise::{apply_noise_protocol, NoiseProtocol};
pub use sources::{load_sources, read_annotations, write_sources, EcgSource, ImageSource, SourcePools};
pub use split::{make_split, DatasetSplit, SampleKey};
pub use synth::{synth_generate, synth_sources, SynthConfig};

/// Source identifiers a virtual subject was assembled from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub ecg: String,
    pub face: String,
    pub finger: String,
}

/// One chimeric identity: an ECG subject, a face identity and a fingerprint
/// identity treated as the same person.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSubject {
    /// Class index.
    pub id: usize,
    pub gender: Gender,
    /// Normalized complexes of each usable ECG record.
    pub ecg_pool: Vec<Vec<QrsComplex>>,
    pub face_pool: Vec<Image>,
    pub finger_pool: Vec<Image>,
    pub provenance: Provenance,
}
