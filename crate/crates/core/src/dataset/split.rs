use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::MultimodalSample;

/// Identity of a drawn sample: subject class and index within that subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub subject: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<MultimodalSample>,
    pub test: Vec<MultimodalSample>,
    /// `train_keys[i]` identifies `train[i]`.
    pub train_keys: Vec<SampleKey>,
    pub test_keys: Vec<SampleKey>,
    pub warnings: Vec<String>,
}

/// Splits each subject's samples `round(ratio · n)` / rest after a seeded
/// shuffle, so every subject appears in both halves when it has at least
/// two samples.
pub fn make_split<R: Rng + ?Sized>(
    per_subject: Vec<Vec<MultimodalSample>>,
    ratio: f64,
    rng: &mut R,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut split = DatasetSplit {
        train: Vec::new(),
        test: Vec::new(),
        train_keys: Vec::new(),
        test_keys: Vec::new(),
        warnings: Vec::new(),
    };
    for (subject, samples) in per_subject.into_iter().enumerate() {
        let n = samples.len();
        if n < 5 {
            split.warnings.push(format!(
                "subject {subject} has only {n} samples; split is best effort"
            ));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut n_train = (ratio * n as f64).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        }
        let mut slots: Vec<Option<MultimodalSample>> = samples.into_iter().map(Some).collect();
        for (pos, &index) in order.iter().enumerate() {
            let s = slots[index].take().expect("each index drawn once");
            let key = SampleKey { subject, index };
            if pos < n_train {
                split.train.push(s);
                split.train_keys.push(key);
            } else {
                split.test.push(s);
                split.test_keys.push(key);
            }
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::Image;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn samples(subject: usize, n: usize) -> Vec<MultimodalSample> {
        (0..n)
            .map(|i| {
                let img = Image::filled(2, 2, i as f64 / n as f64);
                MultimodalSample::new(None, Some(img), None, subject, 0).unwrap()
            })
            .collect()
    }

    #[test]
    fn four_hundred_split() {
        let s = make_split(vec![samples(0, 400)], 0.8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (320, 80));
    }

    #[test]
    fn partition_and_closed_set() {
        let sizes = [10, 13, 7, 400, 21];
        let data = sizes.iter().enumerate().map(|(i, &n)| samples(i, n)).collect();
        let s = make_split(data, 0.8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let train: BTreeSet<SampleKey> = s.train_keys.iter().copied().collect();
        let test: BTreeSet<SampleKey> = s.test_keys.iter().copied().collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), sizes.iter().sum::<usize>());
        for (subject, &n) in sizes.iter().enumerate() {
            let t = s.train_keys.iter().filter(|k| k.subject == subject).count();
            assert!((t as f64 - 0.8 * n as f64).abs() <= 1.0);
            assert!(s.test_keys.iter().any(|k| k.subject == subject));
        }
        for (sample, key) in s.train.iter().zip(&s.train_keys) {
            assert_eq!(sample.person_label, key.subject);
        }
    }

    #[test]
    fn tiny_subjects_warn() {
        let s = make_split(vec![samples(0, 3)], 0.8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!((s.train.len(), s.test.len()), (2, 1));
        assert!(make_split(vec![], 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
