use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{apply_noise_protocol, build_dataset, Dataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::expctl::{
    published_reference, ExperimentConfig, FusionLevel, ReferenceTable, ReportFormat, ResultRow,
    ResultsTable, SweepKind,
};
use crate::fusion::{evaluate, save_model, train, FusedModel, ModalityMask, ScoreEnsemble, TaskMode};

/// Environment variable that overrides the configured report directory.
pub const OUTPUT_ENV: &str = "BIOFUSE_OUT";

const NOISE_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// Independent 64-bit seed for one consumer of a run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// One trained-and-evaluated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub modalities: ModalityMask,
    pub task: TaskMode,
    pub noisy: bool,
}

impl SweepKind {
    pub fn cells(&self, cfg: &ExperimentConfig) -> Vec<CellSpec> {
        let cell = |modalities, task, noisy| CellSpec {
            modalities,
            task,
            noisy,
        };
        match self {
            SweepKind::Single => vec![cell(cfg.modalities, cfg.task, cfg.noise.enabled)],
            SweepKind::Modalities => ModalityMask::nonempty_subsets()
                .into_iter()
                .map(|m| cell(m, TaskMode::Multitask, true))
                .collect(),
            SweepKind::Tasks => TaskMode::ALL
                .into_iter()
                .map(|t| cell(ModalityMask::ALL, t, true))
                .collect(),
            SweepKind::Noise => ModalityMask::nonempty_subsets()
                .into_iter()
                .filter(|m| m.count() >= 2)
                .flat_map(|m| [cell(m, TaskMode::Multitask, true), cell(m, TaskMode::Multitask, false)])
                .collect(),
        }
    }

    fn reference_tables(&self) -> &'static [ReferenceTable] {
        match self {
            SweepKind::Single => &[ReferenceTable::Modalities, ReferenceTable::Tasks, ReferenceTable::Noise],
            SweepKind::Modalities => &[ReferenceTable::Modalities],
            SweepKind::Tasks => &[ReferenceTable::Tasks],
            SweepKind::Noise => &[ReferenceTable::Noise],
        }
    }
}

fn reference(tables: &[ReferenceTable], cell: &CellSpec) -> (Option<f64>, Option<f64>) {
    tables
        .iter()
        .map(|&t| published_reference(t, cell.modalities, cell.task, cell.noisy))
        .find(|(id, g)| id.is_some() || g.is_some())
        .unwrap_or((None, None))
}

/// A seed's dataset plus, when needed, its noisy copy. Every cell of a
/// sweep trains on the same samples so cells compare pairwise.
struct Prepared {
    dataset: Dataset,
    noisy: Option<DatasetSplit>,
}

impl Prepared {
    fn new(cfg: &ExperimentConfig, seed: u64, need_noisy: bool) -> Result<Self> {
        let dataset = build_dataset(&cfg.dataset, seed)?;
        let noisy = if need_noisy {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, NOISE_STREAM));
            Some(apply_noise_protocol(&dataset.split, &cfg.noise.protocol(), &mut rng)?)
        } else {
            None
        };
        Ok(Self { dataset, noisy })
    }

    fn split(&self, noisy: bool) -> &DatasetSplit {
        match (&self.noisy, noisy) {
            (Some(n), true) => n,
            _ => &self.dataset.split,
        }
    }
}

/// Where a cell's checkpoint goes, relative to the report directory.
fn model_dir(out: &Path, name: &str, seed: u64, cell: &CellSpec) -> PathBuf {
    let noise = if cell.noisy { "noisy" } else { "clean" };
    out.join(format!("{name}-models"))
        .join(format!("seed{seed}-{}-{}-{noise}", cell.modalities, cell.task))
}

/// Trains and evaluates one cell on a prepared split.
pub fn run_cell(
    cfg: &ExperimentConfig,
    split: &DatasetSplit,
    num_subjects: usize,
    seed: u64,
    cell: &CellSpec,
    save_to: Option<&Path>,
) -> Result<ResultRow> {
    let model_cfg = cfg
        .model
        .model_config(num_subjects, cfg.dataset.image_size, cell.task);
    let train_cfg = cfg
        .train
        .train_config(derive_seed(seed, SHUFFLE_STREAM), cell.modalities);
    let model_seed = derive_seed(seed, MODEL_STREAM);
    let started = Instant::now();
    let accuracy = match cfg.fusion {
        FusionLevel::Feature => {
            let mut model = FusedModel::new(model_cfg, model_seed)?;
            train(&mut model, &split.train, &train_cfg)?;
            let train_time = started.elapsed();
            if let Some(dir) = save_to {
                save_model(dir, &model, model_seed)?;
            }
            (evaluate(&mut model, &split.test, cell.modalities)?, train_time)
        }
        FusionLevel::Score(rule) => {
            let (mut ensemble, _) =
                ScoreEnsemble::train(&model_cfg, cell.modalities, model_seed, &split.train, &train_cfg)?;
            let train_time = started.elapsed();
            if let Some(dir) = save_to {
                for (k, (m, model)) in ensemble.members.iter().enumerate() {
                    save_model(&dir.join(m.to_string()), model, model_seed.wrapping_add(k as u64))?;
                }
            }
            (ensemble.evaluate(&split.test, rule)?, train_time)
        }
    };
    let (acc, train_time) = accuracy;
    Ok(ResultRow {
        modalities: cell.modalities,
        task: cell.task,
        noisy: cell.noisy,
        seed,
        id_acc: cell.task.uses_id().then_some(acc.id),
        gender_acc: cell.task.uses_gender().then_some(acc.gender),
        paper_ref_id: None,
        paper_ref_gender: None,
        train_time_s: train_time.as_secs_f64(),
    })
}

/// Runs every cell of `kind` for every configured seed. `progress` sees
/// each row as it completes.
pub fn sweep(
    cfg: &ExperimentConfig,
    kind: SweepKind,
    save_dir: Option<&Path>,
    progress: &mut dyn FnMut(&ResultRow),
) -> Result<(ResultsTable, Vec<(u64, Dataset)>)> {
    cfg.validate()?;
    let cells = kind.cells(cfg);
    let need_noisy = cells.iter().any(|c| c.noisy);
    let tables = kind.reference_tables();
    let mut rows = Vec::with_capacity(cells.len() * cfg.seeds.len());
    let mut datasets = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let prepared = Prepared::new(cfg, seed, need_noisy)?;
        let n = prepared.dataset.subjects.len();
        for cell in &cells {
            let dir = save_dir.map(|d| model_dir(d, &cfg.name, seed, cell));
            let mut row = run_cell(cfg, prepared.split(cell.noisy), n, seed, cell, dir.as_deref())?;
            (row.paper_ref_id, row.paper_ref_gender) = reference(tables, cell);
            progress(&row);
            rows.push(row);
        }
        datasets.push((seed, prepared.dataset));
    }
    Ok((ResultsTable { rows }, datasets))
}

/// The configured cell, once per seed.
pub fn run(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&ResultRow)) -> Result<ResultsTable> {
    sweep(cfg, SweepKind::Single, None, progress).map(|(t, _)| t)
}

/// `BIOFUSE_OUT` if set, else the configured directory.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output.clone())
}

/// Runs a sweep and writes `<name>-<kind>.csv`, `<name>-<kind>.json` and a
/// dataset manifest per seed into `out`. Returns the table and the paths
/// written.
pub fn execute(
    cfg: &ExperimentConfig,
    kind: SweepKind,
    out: &Path,
    progress: &mut dyn FnMut(&ResultRow),
) -> Result<(ResultsTable, Vec<PathBuf>)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let save_dir = cfg.save_models.then_some(out);
    let (table, datasets) = sweep(cfg, kind, save_dir, progress)?;
    let mut written = Vec::new();
    for format in [ReportFormat::Csv, ReportFormat::Json] {
        let path = out.join(format!("{}-{kind}.{}", cfg.name, format.extension()));
        table.write(&path, format)?;
        written.push(path);
    }
    for (seed, dataset) in &datasets {
        let path = out.join(format!("{}-dataset-seed{seed}.json", cfg.name));
        dataset.manifest(&cfg.dataset).write(&path)?;
        written.push(path);
    }
    Ok((table, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_stream() {
        let s: Vec<u64> = (0..4).map(|k| derive_seed(7, k)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(derive_seed(7, 2), derive_seed(7, 2));
        assert_ne!(derive_seed(7, 2), derive_seed(8, 2));
    }

    #[test]
    fn sweep_grids() {
        let cfg = ExperimentConfig::from_toml_str("[dataset.source.synthetic]\n").unwrap();
        for kind in [SweepKind::Single, SweepKind::Modalities, SweepKind::Tasks, SweepKind::Noise] {
            assert_eq!(kind.cells(&cfg).len(), kind.rows_per_seed());
        }
        let noise = SweepKind::Noise.cells(&cfg);
        assert!(noise.iter().all(|c| c.modalities.count() >= 2 && c.task == TaskMode::Multitask));
        assert_eq!(noise.iter().filter(|c| c.noisy).count(), 4);
    }

    #[test]
    fn single_run_prefers_first_matching_table() {
        let tables = SweepKind::Single.reference_tables();
        let efp = CellSpec {
            modalities: ModalityMask::ALL,
            task: TaskMode::Multitask,
            noisy: true,
        };
        assert_eq!(reference(tables, &efp), (Some(0.9828), Some(0.977)));
        let clean = CellSpec { noisy: false, ..efp };
        assert_eq!(reference(tables, &clean), (Some(1.0), Some(0.9943)));
        let solo_clean = CellSpec {
            modalities: "face".parse().unwrap(),
            ..clean
        };
        assert_eq!(reference(tables, &solo_clean), (None, None));
    }
}
