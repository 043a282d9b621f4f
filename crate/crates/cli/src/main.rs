use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biofuse_core::dataset::{synth_sources, write_sources, SynthConfig};
use biofuse_core::expctl::{
    execute, gradient_suite, output_dir, ExperimentConfig, ResultRow, ResultsTable, SweepKind,
};
use biofuse_core::Error;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multimodal ECG / face / fingerprint identification experiments.
#[derive(Debug, Parser)]
#[command(name = "biofuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate the configured cell for every seed.
    Run {
        config: PathBuf,
        /// Report directory (overrides BIOFUSE_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the experiment grids: modalities, tasks or noise.
    Sweep {
        #[arg(value_parser = parse_sweep)]
        kind: SweepKind,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every layer and the full network.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic source tree (ecg/, face/, finger/, annotations).
    Synth {
        #[arg(long, default_value_t = 20)]
        subjects: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 16)]
        image_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_sweep(s: &str) -> Result<SweepKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Usage and configuration problems exit 1, everything else 2.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn print_row(row: &ResultRow) {
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
    eprintln!(
        "seed {:>3}  {:<16} {:<11} {:<5}  id {:>6}  gender {:>6}  ({:.1}s)",
        row.seed,
        row.modalities.to_string(),
        row.task.to_string(),
        if row.noisy { "noisy" } else { "clean" },
        pct(row.id_acc),
        pct(row.gender_acc),
        row.train_time_s
    );
}

/// Mean over seeds per cell, with the published reference next to it.
fn print_summary(table: &ResultsTable) {
    let mut cells: Vec<&ResultRow> = Vec::new();
    for r in &table.rows {
        if !cells
            .iter()
            .any(|c| (c.modalities, c.task, c.noisy) == (r.modalities, r.task, r.noisy))
        {
            cells.push(r);
        }
    }
    println!(
        "{:<16} {:<11} {:<5} {:>8} {:>8} {:>8} {:>8}",
        "modalities", "task", "noise", "id", "gender", "ref_id", "ref_gen"
    );
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
    for c in cells {
        let same = |r: &ResultRow| (r.modalities, r.task, r.noisy) == (c.modalities, c.task, c.noisy);
        println!(
            "{:<16} {:<11} {:<5} {:>8} {:>8} {:>8} {:>8}",
            c.modalities.to_string(),
            c.task.to_string(),
            if c.noisy { "noisy" } else { "clean" },
            pct(table.mean(same, |r| r.id_acc)),
            pct(table.mean(same, |r| r.gender_acc)),
            pct(c.paper_ref_id),
            pct(c.paper_ref_gender),
        );
    }
}

fn experiment(config: &Path, kind: SweepKind, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let out = out.unwrap_or_else(|| output_dir(&cfg));
    let (table, written) = execute(&cfg, kind, &out, &mut print_row)?;
    print_summary(&table);
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => experiment(&config, SweepKind::Single, out),
        Command::Sweep { kind, config, out } => experiment(&config, kind, out),
        Command::Gradcheck { seed } => {
            let entries = gradient_suite(seed)?;
            let mut failed = 0;
            for e in &entries {
                let r = &e.report;
                let verdict = if r.passed() { "ok" } else { "FAIL" };
                failed += usize::from(!r.passed());
                println!(
                    "{verdict:<4} {:<32} checked {:>4}  skipped {:>3}  max rel err {:.2e}",
                    e.name, r.checked, r.skipped, r.max_rel_error
                );
            }
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} gradient checks failed")));
            }
            Ok(())
        }
        Command::Synth {
            subjects,
            samples,
            image_size,
            seed,
            out,
        } => {
            let cfg = SynthConfig {
                n_subjects: subjects,
                samples_per_subject: samples,
                image_size,
                ..SynthConfig::default()
            };
            let pools = synth_sources(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_sources(&out, &pools)?;
            eprintln!("wrote {} identities to {}", subjects, out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
