use biofuse_core::dataset::{build_dataset, Dataset, DatasetConfig, SynthConfig};
use biofuse_core::fusion::{
    evaluate, infer, load_model, predict, save_model, train, FusedModel, ModalityMask, ModelConfig,
    MultimodalSample, TaskMode, TrainConfig,
};
use biofuse_core::numcore::{Mode, Parameterized};
use biofuse_core::vision::{ExtractorConfig, Image};
use biofuse_core::{Error, Modality};

const SIZE: usize = 12;

fn small_dataset(seed: u64) -> Dataset {
    let synth = SynthConfig {
        n_subjects: 4,
        samples_per_subject: 10,
        image_size: SIZE,
        ..SynthConfig::default()
    };
    build_dataset(&DatasetConfig::synthetic(synth), seed).unwrap()
}

fn config(task: TaskMode) -> ModelConfig {
    ModelConfig {
        task_mode: task,
        trunk: vec![12],
        image: ExtractorConfig {
            input_width: SIZE,
            input_height: SIZE,
            channels: vec![3],
            kernel: 3,
        },
        ..ModelConfig::new(4)
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 4,
        batch_size: 8,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn snapshot(model: &FusedModel) -> Vec<(String, Vec<u64>)> {
    model
        .named_params()
        .into_iter()
        .map(|(n, p)| {
            let bits = p.weights.data().iter().chain(p.bias.data()).map(|v| v.to_bits()).collect();
            (n, bits)
        })
        .collect()
}

fn block<'a>(snap: &'a [(String, Vec<u64>)], name: &str) -> &'a [u64] {
    &snap.iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn training_is_deterministic() {
    let data = small_dataset(1);
    let run = || {
        let mut m = FusedModel::new(config(TaskMode::Multitask), 9).unwrap();
        let log = train(&mut m, &data.split.train, &quick_train()).unwrap();
        (snapshot(&m), log)
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
}

#[test]
fn single_task_training_leaves_the_other_head_untouched() {
    let data = small_dataset(2);
    for (task, frozen, moving) in [
        (TaskMode::IdOnly, "head.gender", "head.id"),
        (TaskMode::GenderOnly, "head.id", "head.gender"),
    ] {
        let mut m = FusedModel::new(config(task), 4).unwrap();
        let before = snapshot(&m);
        train(&mut m, &data.split.train, &quick_train()).unwrap();
        let after = snapshot(&m);
        assert_eq!(block(&before, frozen), block(&after, frozen), "{task}");
        assert_ne!(block(&before, moving), block(&after, moving), "{task}");
    }
}

#[test]
fn masked_modality_and_missing_modality_give_identical_logits() {
    let data = small_dataset(3);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 5).unwrap();
    train(&mut m, &data.split.train, &quick_train()).unwrap();
    let keep = ModalityMask::new(true, false, true);
    let full: Vec<MultimodalSample> = data.split.test.clone();
    let stripped: Vec<MultimodalSample> = full.iter().map(|s| s.restricted(keep).unwrap()).collect();
    // Scribbling over an inactive image must not matter either.
    let scribbled: Vec<MultimodalSample> = full
        .iter()
        .map(|s| MultimodalSample {
            face: Some(Image::filled(SIZE, SIZE, 0.123)),
            ..s.clone()
        })
        .collect();
    let a = infer(&mut m, &full, keep).unwrap();
    let b = infer(&mut m, &stripped, ModalityMask::ALL).unwrap();
    let c = infer(&mut m, &scribbled, keep).unwrap();
    assert_eq!(a.id.data(), b.id.data());
    assert_eq!(a.gender.data(), b.gender.data());
    assert_eq!(a.id.data(), c.id.data());
}

#[test]
fn inference_rows_do_not_depend_on_batch_company() {
    let data = small_dataset(4);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 6).unwrap();
    train(&mut m, &data.split.train, &quick_train()).unwrap();
    let masks = [
        ModalityMask::ALL,
        ModalityMask::only(Modality::Ecg),
        ModalityMask::new(false, true, true),
    ];
    let mixed: Vec<MultimodalSample> = data
        .split
        .test
        .iter()
        .enumerate()
        .map(|(i, s)| s.restricted(masks[i % 3]).unwrap())
        .collect();
    let batched = infer(&mut m, &mixed, ModalityMask::ALL).unwrap();
    for (i, s) in mixed.iter().enumerate() {
        let solo = m.forward(&[s], ModalityMask::ALL, Mode::Infer).unwrap();
        assert_eq!(solo.id.row(0), batched.id.row(i));
        assert_eq!(solo.gender.data()[0], batched.gender.data()[i]);
    }
}

#[test]
fn recalibrated_statistics_match_a_full_batch_pass() {
    let data = small_dataset(5);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 7).unwrap();
    let cfg = TrainConfig {
        recalibrate_bn: false,
        ..quick_train()
    };
    train(&mut m, &data.split.train, &cfg).unwrap();

    // Oracle: one train-mode pass over the whole split with momentum 1
    // leaves exactly the split's statistics in the running buffers.
    let mut oracle = m.clone();
    for bn in &mut oracle.bn {
        bn.state.momentum = 1.0;
    }
    let all: Vec<&MultimodalSample> = data.split.train.iter().collect();
    oracle.forward(&all, ModalityMask::ALL, Mode::Train).unwrap();

    m.recalibrate_bn(&data.split.train, ModalityMask::ALL).unwrap();
    for (got, want) in m.bn.iter().zip(&oracle.bn) {
        for (a, b) in got.state.running_mean.iter().zip(&want.state.running_mean) {
            assert!((a - b).abs() <= 1e-10, "mean {a} vs {b}");
        }
        for (a, b) in got.state.running_var.iter().zip(&want.state.running_var) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-3), "var {a} vs {b}");
        }
    }
}

#[test]
fn checkpoint_reproduces_predictions() {
    let data = small_dataset(6);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 8).unwrap();
    train(&mut m, &data.split.train, &quick_train()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &m, 8).unwrap();
    let (mut back, manifest) = load_model(dir.path()).unwrap();
    assert_eq!(manifest.seed, 8);
    assert_eq!(&manifest.config, m.config());
    let a = infer(&mut m, &data.split.test, ModalityMask::ALL).unwrap();
    let b = infer(&mut back, &data.split.test, ModalityMask::ALL).unwrap();
    assert_eq!(a.id.data(), b.id.data());
    assert_eq!(a.gender.data(), b.gender.data());
}

#[test]
fn prediction_agrees_with_batch_inference() {
    let data = small_dataset(7);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 1).unwrap();
    train(&mut m, &data.split.train, &quick_train()).unwrap();
    let logits = infer(&mut m, &data.split.test, ModalityMask::ALL).unwrap();
    for (i, s) in data.split.test.iter().enumerate() {
        let p = predict(&mut m, s, ModalityMask::ALL).unwrap();
        assert!((p.id_scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let row = logits.id.row(i);
        let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
        assert_eq!(p.person_id, best);
        assert_eq!(p.female_probability >= 0.5, logits.gender.data()[i] >= 0.0);
    }
    let ecg_only = data.split.test[0].restricted(ModalityMask::only(Modality::Ecg)).unwrap();
    let err = predict(&mut m, &ecg_only, ModalityMask::new(false, true, true)).unwrap_err();
    assert!(matches!(err, Error::MaskExhausted(_)));
}

#[test]
fn identical_inputs_cannot_beat_the_majority_class() {
    // Every sample carries the same signals, so the network cannot tell
    // subjects apart: accuracy is capped by the largest label share.
    let data = small_dataset(8);
    let template = data.split.train[0].clone();
    let labels = [0, 1, 2, 3, 3, 3, 1, 0, 2, 3];
    let samples: Vec<MultimodalSample> = labels
        .iter()
        .map(|&l| MultimodalSample {
            person_label: l,
            gender_label: (l % 2) as u8,
            ..template.clone()
        })
        .collect();
    let mut m = FusedModel::new(config(TaskMode::Multitask), 2).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 10,
        ..quick_train()
    };
    train(&mut m, &samples, &cfg).unwrap();
    let acc = evaluate(&mut m, &samples, ModalityMask::ALL).unwrap();
    assert!(acc.id <= 0.4 + 1e-12, "{}", acc.id);
    assert!(acc.gender <= 0.6 + 1e-12, "{}", acc.gender);
}

#[test]
fn absent_extractors_receive_no_gradient_in_training_batches() {
    let data = small_dataset(9);
    let mut m = FusedModel::new(config(TaskMode::Multitask), 3).unwrap();
    let batch: Vec<MultimodalSample> = data.split.train[..8]
        .iter()
        .map(|s| s.restricted(ModalityMask::new(true, false, true)).unwrap())
        .collect();
    let refs: Vec<&MultimodalSample> = batch.iter().collect();
    m.zero_grad();
    let logits = m.forward(&refs, ModalityMask::ALL, Mode::Train).unwrap();
    let (_, g) = m.loss(&logits, &refs).unwrap();
    m.backward(&g).unwrap();
    assert!(m.extractor_params(Modality::Face).iter().all(|p| p.grads_are_zero()));
    assert!(!m.extractor_params(Modality::Ecg).iter().all(|p| p.grads_are_zero()));
    assert!(!m.extractor_params(Modality::Finger).iter().all(|p| p.grads_are_zero()));
}
