//! Published accuracies (percent) used as reference columns.

use crate::fusion::{ModalityMask, TaskMode};

/// Which published table a cell mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceTable {
    Modalities,
    Tasks,
    Noise,
}

const E: ModalityMask = ModalityMask { ecg: true, face: false, finger: false };
const F: ModalityMask = ModalityMask { ecg: false, face: true, finger: false };
const P: ModalityMask = ModalityMask { ecg: false, face: false, finger: true };
const EF: ModalityMask = ModalityMask { ecg: true, face: true, finger: false };
const EP: ModalityMask = ModalityMask { ecg: true, face: false, finger: true };
const FP: ModalityMask = ModalityMask { ecg: false, face: true, finger: true };
const EFP: ModalityMask = ModalityMask::ALL;

/// Modality combinations, multitask, noisy input.
const MODALITIES: [(ModalityMask, f64, f64); 7] = [
    (E, 77.49, 91.95),
    (F, 76.44, 88.51),
    (P, 83.91, 90.80),
    (EF, 95.98, 93.68),
    (EP, 94.83, 95.40),
    (FP, 96.55, 94.83),
    (EFP, 98.28, 97.70),
];

/// Three modalities, noisy input.
const TASKS: [(TaskMode, Option<f64>, Option<f64>); 3] = [
    (TaskMode::IdOnly, Some(98.28), None),
    (TaskMode::GenderOnly, None, Some(97.70)),
    (TaskMode::Multitask, Some(98.97), Some(96.55)),
];

/// Multitask; `(mask, noisy id, noisy gender, clean id, clean gender)`.
const NOISE: [(ModalityMask, f64, f64, f64, f64); 4] = [
    (EF, 94.83, 95.02, 100.0, 100.0),
    (EP, 93.68, 95.21, 98.85, 96.55),
    (FP, 95.21, 92.91, 100.0, 98.85),
    (EFP, 98.97, 96.55, 100.0, 99.43),
];

/// Published `(id, gender)` accuracies as fractions for a cell, where the
/// table has one.
pub fn published_reference(
    table: ReferenceTable,
    mask: ModalityMask,
    task: TaskMode,
    noisy: bool,
) -> (Option<f64>, Option<f64>) {
    let frac = |v: f64| Some((v * 100.0).round() / 10_000.0);
    match table {
        ReferenceTable::Modalities if task == TaskMode::Multitask && noisy => MODALITIES
            .iter()
            .find(|(m, ..)| *m == mask)
            .map(|&(_, id, g)| (frac(id), frac(g)))
            .unwrap_or((None, None)),
        ReferenceTable::Tasks if mask == EFP && noisy => TASKS
            .iter()
            .find(|(t, ..)| *t == task)
            .map(|&(_, id, g)| (id.and_then(frac), g.and_then(frac)))
            .unwrap_or((None, None)),
        ReferenceTable::Noise if task == TaskMode::Multitask => NOISE
            .iter()
            .find(|(m, ..)| *m == mask)
            .map(|&(_, nid, ng, cid, cg)| {
                if noisy {
                    (frac(nid), frac(ng))
                } else {
                    (frac(cid), frac(cg))
                }
            })
            .unwrap_or((None, None)),
        _ => (None, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let r = published_reference(ReferenceTable::Modalities, EFP, TaskMode::Multitask, true);
        assert_eq!(r, (Some(0.9828), Some(0.977)));
        let r = published_reference(ReferenceTable::Tasks, EFP, TaskMode::IdOnly, true);
        assert_eq!(r, (Some(0.9828), None));
        let r = published_reference(ReferenceTable::Noise, EFP, TaskMode::Multitask, false);
        assert_eq!(r, (Some(1.0), Some(0.9943)));
        let r = published_reference(ReferenceTable::Noise, E, TaskMode::Multitask, false);
        assert_eq!(r, (None, None));
        let r = published_reference(ReferenceTable::Modalities, P, TaskMode::Multitask, false);
        assert_eq!(r, (None, None));
    }
}
