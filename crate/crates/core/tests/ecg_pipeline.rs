use biofuse_core::ecg::synth::{mean_power, render, BeatTemplate, RenderConfig};
use biofuse_core::ecg::{
    detect_r_peaks, extract_qrs, resample, segment_record, SignalRecord, QRS_LEN, R_OFFSET,
};
use biofuse_core::Gender;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_train(seed: u64, snr_db: f64) -> (SignalRecord, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bpm = rng.random_range(50.0..120.0);
    let cfg = RenderConfig {
        bpm,
        duration_s: 10.0,
        ..RenderConfig::default()
    };
    let (mut x, truth) = render(&BeatTemplate::standard(), &cfg, &mut rng);
    let noise_std = (mean_power(&x) / 10f64.powf(snr_db / 10.0)).sqrt();
    for v in &mut x {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        *v += noise_std * z;
    }
    (SignalRecord::new(x, 500, "s", Gender::Male, None).unwrap(), truth)
}

#[test]
fn detects_beats_in_noisy_trains() {
    let (mut hit, mut total) = (0, 0);
    for seed in 0..20 {
        let (rec, truth) = noisy_train(seed, 10.0);
        let peaks = detect_r_peaks(&rec).unwrap();
        assert!(peaks.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] >= 100));
        total += truth.len();
        hit += truth
            .iter()
            .filter(|&&t| peaks.iter().any(|&p| p.abs_diff(t) <= 10))
            .count();
    }
    let rate = hit as f64 / total as f64;
    assert!(rate >= 0.95, "detection rate {rate}");
}

#[test]
fn segmentation_from_1khz_record() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = RenderConfig {
        rate: 1000,
        duration_s: 20.0,
        ..RenderConfig::default()
    };
    let (x, _) = render(&BeatTemplate::standard(), &cfg, &mut rng);
    let rec = SignalRecord::new(x, 1000, "ptb", Gender::Female, Some(31)).unwrap();
    let down = resample(&rec, 500).unwrap();
    assert_eq!(down.samples.len(), 10_000);
    let complexes = segment_record(&rec).unwrap();
    assert!(complexes.len() >= 15, "{}", complexes.len());
    for c in &complexes {
        assert_eq!(c.values.len(), QRS_LEN);
        // The R apex is the maximum of a clean complex.
        let apex = (0..QRS_LEN)
            .max_by(|&a, &b| c.values[a].partial_cmp(&c.values[b]).unwrap())
            .unwrap();
        assert!(apex.abs_diff(R_OFFSET) <= 1, "apex at {apex}");
    }
    assert_eq!(segment_record(&rec).unwrap(), complexes);
}

#[test]
fn extraction_windows_always_centered() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rec = SignalRecord::new(
        (0..2000).map(|i| i as f64).collect(),
        500,
        "x",
        Gender::Unknown,
        None,
    )
    .unwrap();
    for _ in 0..1000 {
        let r = rng.random_range(150..=1850);
        let q = extract_qrs(&rec, r).unwrap();
        assert_eq!(q.values.len(), QRS_LEN);
        assert_eq!(q.values[R_OFFSET], r as f64);
    }
}
