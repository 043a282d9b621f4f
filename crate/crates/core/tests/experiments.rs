use std::path::{Path, PathBuf};

use biofuse_core::expctl::{execute, run, ExperimentConfig, ResultsTable, SweepKind};
use biofuse_core::fusion::{evaluate, load_model, ModalityMask, TaskMode};
use biofuse_core::dataset::build_dataset;
use biofuse_core::Error;

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

const TINY: &str = r#"
name = "tiny"
seeds = [1, 2]

[dataset]
image_size = 12

[dataset.source.synthetic]
n_subjects = 3
samples_per_subject = 8

[dataset.expand]
target = 8

[model]
trunk = [8]
image_channels = [2]

[train]
epochs = 2
batch_size = 8
"#;

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(TINY).unwrap()
}

#[test]
fn shipped_configs_parse() {
    for name in ["desk.toml", "score_fusion.toml", "smoke.toml"] {
        let cfg = ExperimentConfig::load(&repo_config(name)).unwrap();
        assert!(!cfg.seeds.is_empty(), "{name}");
    }
}

#[test]
fn smoke_run_yields_one_row_per_seed() {
    let cfg = ExperimentConfig::load(&repo_config("smoke.toml")).unwrap();
    let mut seen = 0;
    let table = run(&cfg, &mut |_| seen += 1).unwrap();
    assert_eq!(table.rows.len(), cfg.seeds.len());
    assert_eq!(seen, cfg.seeds.len());
    for row in &table.rows {
        let id = row.id_acc.unwrap();
        assert!((0.0..=1.0).contains(&id));
        assert!(row.gender_acc.is_some());
        assert_eq!(row.modalities, ModalityMask::ALL);
        // Two subjects with clean-enough data: well above a coin flip.
        assert!(id >= 0.75, "smoke id accuracy {id}");
    }
}

#[test]
fn every_sweep_has_its_grid_size() {
    let cfg = tiny();
    for kind in [SweepKind::Modalities, SweepKind::Tasks, SweepKind::Noise] {
        let dir = tempfile::tempdir().unwrap();
        let (table, written) = execute(&cfg, kind, dir.path(), &mut |_| {}).unwrap();
        assert_eq!(table.rows.len(), kind.rows_per_seed() * cfg.seeds.len(), "{kind}");
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                format!("tiny-{kind}.csv"),
                format!("tiny-{kind}.json"),
                "tiny-dataset-seed1.json".to_string(),
                "tiny-dataset-seed2.json".to_string(),
            ]
        );
        let from_csv = ResultsTable::read(&dir.path().join(format!("tiny-{kind}.csv"))).unwrap();
        let from_json = ResultsTable::read(&dir.path().join(format!("tiny-{kind}.json"))).unwrap();
        assert_eq!(from_csv, from_json);
        assert_eq!(from_csv.rows.len(), table.rows.len());
    }
}

#[test]
fn single_task_rows_leave_the_other_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let (table, _) = execute(&tiny(), SweepKind::Tasks, dir.path(), &mut |_| {}).unwrap();
    for row in &table.rows {
        assert_eq!(row.id_acc.is_some(), row.task != TaskMode::GenderOnly);
        assert_eq!(row.gender_acc.is_some(), row.task != TaskMode::IdOnly);
    }
    let csv = std::fs::read_to_string(dir.path().join("tiny-tasks.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains("id_only") && l.contains(",,")), "{csv}");
}

#[test]
fn saved_models_reproduce_reported_accuracy() {
    let mut cfg = tiny();
    cfg.seeds = vec![3];
    cfg.save_models = true;
    let dir = tempfile::tempdir().unwrap();
    let (table, _) = execute(&cfg, SweepKind::Single, dir.path(), &mut |_| {}).unwrap();
    let row = &table.rows[0];
    let model_dir = dir
        .path()
        .join("tiny-models")
        .join(format!("seed3-{}-{}-noisy", row.modalities, row.task));
    let (mut model, _) = load_model(&model_dir).unwrap();

    // Rebuild the exact noisy test split the sweep evaluated on.
    let data = build_dataset(&cfg.dataset, 3).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
        biofuse_core::expctl::derive_seed(3, 1),
    );
    let noisy =
        biofuse_core::dataset::apply_noise_protocol(&data.split, &cfg.noise.protocol(), &mut rng).unwrap();
    let acc = evaluate(&mut model, &noisy.test, row.modalities).unwrap();
    assert_eq!(Some(acc.id), row.id_acc);
    assert_eq!(Some(acc.gender), row.gender_acc);
}

#[test]
fn score_fusion_config_runs() {
    let mut cfg = ExperimentConfig::load(&repo_config("score_fusion.toml")).unwrap();
    let small = tiny();
    cfg.dataset = small.dataset;
    cfg.model = small.model;
    cfg.train = small.train;
    cfg.seeds = vec![1];
    let table = run(&cfg, &mut |_| {}).unwrap();
    assert!(table.rows[0].id_acc.is_some());
}

#[test]
fn config_errors_are_config_errors() {
    for (text, needle) in [
        ("seeds = []\n[dataset.source.synthetic]\n", "seeds"),
        ("[dataset.source.synthetic]\n[train]\nepochs = 0\n", "epochs"),
        ("[dataset.source.synthetic]\nbogus = 1\n", "bogus"),
        ("fusion = \"median\"\n[dataset.source.synthetic]\n", "median"),
        ("[dataset]\nsplit_ratio = 1.5\n[dataset.source.synthetic]\n", "split_ratio"),
    ] {
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config(msg)) => assert!(msg.contains(needle), "{needle}: {msg}"),
            other => panic!("{needle}: expected a config error, got {other:?}"),
        }
    }
    let missing = ExperimentConfig::load(Path::new("/nonexistent/biofuse.toml")).unwrap_err();
    assert!(missing.to_string().contains("/nonexistent/biofuse.toml"));
}

#[test]
fn config_survives_toml_round_trip() {
    for name in ["desk.toml", "score_fusion.toml", "smoke.toml"] {
        let cfg = ExperimentConfig::load(&repo_config(name)).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}
