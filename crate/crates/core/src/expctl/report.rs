//! Results tables and their CSV / JSON reports.
//!
//! Columns: `modalities, task, noise, seed, id_acc, gender_acc,
//! paper_ref_id, paper_ref_gender`. Accuracies are fractions written with
//! four decimals; a cell whose task does not produce a value is left empty.
//! Reference columns hold published percentages divided by 100.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{ModalityMask, TaskMode};

pub const COLUMNS: [&str; 8] = [
    "modalities",
    "task",
    "noise",
    "seed",
    "id_acc",
    "gender_acc",
    "paper_ref_id",
    "paper_ref_gender",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub modalities: ModalityMask,
    pub task: TaskMode,
    pub noisy: bool,
    pub seed: u64,
    pub id_acc: Option<f64>,
    pub gender_acc: Option<f64>,
    pub paper_ref_id: Option<f64>,
    pub paper_ref_gender: Option<f64>,
    /// Wall-clock training time; kept out of reports so they stay
    /// reproducible byte for byte.
    #[serde(skip)]
    pub train_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn noise_label(noisy: bool) -> &'static str {
    if noisy {
        "noisy"
    } else {
        "clean"
    }
}

impl ResultsTable {
    /// Mean of a column over the rows matching `filter`, ignoring empties.
    pub fn mean<F, G>(&self, filter: F, column: G) -> Option<f64>
    where
        F: Fn(&ResultRow) -> bool,
        G: Fn(&ResultRow) -> Option<f64>,
    {
        let vals: Vec<f64> = self.rows.iter().filter(|r| filter(r)).filter_map(column).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// The table as it reads back from a report.
    pub fn rounded(&self) -> ResultsTable {
        ResultsTable {
            rows: self
                .rows
                .iter()
                .map(|r| ResultRow {
                    id_acc: r.id_acc.map(round4),
                    gender_acc: r.gender_acc.map(round4),
                    paper_ref_id: r.paper_ref_id.map(round4),
                    paper_ref_gender: r.paper_ref_gender.map(round4),
                    train_time_s: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        self.check_nonempty()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
        w.write_record(COLUMNS).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.modalities.to_string(),
                r.task.to_string(),
                noise_label(r.noisy).to_string(),
                r.seed.to_string(),
                fmt_opt(r.id_acc),
                fmt_opt(r.gender_acc),
                fmt_opt(r.paper_ref_id),
                fmt_opt(r.paper_ref_gender),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<ResultsTable> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let fmt = |offset: usize, message: String| Error::Format { offset, message };
        let header = reader.headers().map_err(|e| fmt(0, e.to_string()))?.clone();
        if header.iter().ne(COLUMNS) {
            return Err(fmt(0, format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| fmt(0, e.to_string()))?;
            let at = rec.position().map(|p| p.byte() as usize).unwrap_or(0);
            let opt = |i: usize| -> Result<Option<f64>> {
                let s = &rec[i];
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| fmt(at, format!("bad {} value {s:?}", COLUMNS[i])))
                }
            };
            let noisy = match &rec[2] {
                "noisy" => true,
                "clean" => false,
                other => return Err(fmt(at, format!("bad noise value {other:?}"))),
            };
            rows.push(ResultRow {
                modalities: rec[0].parse().map_err(|e| fmt(at, format!("{e}")))?,
                task: rec[1].parse().map_err(|e| fmt(at, format!("{e}")))?,
                noisy,
                seed: rec[3].parse().map_err(|_| fmt(at, format!("bad seed {:?}", &rec[3])))?,
                id_acc: opt(4)?,
                gender_acc: opt(5)?,
                paper_ref_id: opt(6)?,
                paper_ref_gender: opt(7)?,
                train_time_s: 0.0,
            });
        }
        Ok(ResultsTable { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_nonempty()?;
        let rows: Vec<JsonRow> = self.rows.iter().map(JsonRow::from).collect();
        let text = serde_json::to_string_pretty(&rows).map_err(|e| Error::Config(e.to_string()))?;
        Ok(text + "\n")
    }

    pub fn from_json(text: &str) -> Result<ResultsTable> {
        let rows: Vec<JsonRow> = serde_json::from_str(text).map_err(|e| Error::Format {
            offset: e.column(),
            message: e.to_string(),
        })?;
        rows.into_iter().map(ResultRow::try_from).collect::<Result<_>>().map(|rows| ResultsTable { rows })
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.rows.is_empty() {
            Err(Error::EmptyInput("results table has no rows".into()))
        } else {
            Ok(())
        }
    }

    /// Writes the report to `path` in `format`.
    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let text = match format {
            ReportFormat::Csv => self.to_csv()?,
            ReportFormat::Json => self.to_json()?,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<ResultsTable> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }
}

/// JSON shape of a row: accuracies as fixed four-decimal strings so the
/// file is as stable as the CSV.
#[derive(Debug, Serialize, Deserialize)]
struct JsonRow {
    modalities: String,
    task: String,
    noise: String,
    seed: u64,
    id_acc: Option<String>,
    gender_acc: Option<String>,
    paper_ref_id: Option<String>,
    paper_ref_gender: Option<String>,
}

impl From<&ResultRow> for JsonRow {
    fn from(r: &ResultRow) -> Self {
        let s = |v: Option<f64>| v.map(|x| format!("{x:.4}"));
        JsonRow {
            modalities: r.modalities.to_string(),
            task: r.task.to_string(),
            noise: noise_label(r.noisy).into(),
            seed: r.seed,
            id_acc: s(r.id_acc),
            gender_acc: s(r.gender_acc),
            paper_ref_id: s(r.paper_ref_id),
            paper_ref_gender: s(r.paper_ref_gender),
        }
    }
}

impl TryFrom<JsonRow> for ResultRow {
    type Error = Error;

    fn try_from(j: JsonRow) -> Result<Self> {
        let num = |v: Option<String>| -> Result<Option<f64>> {
            v.map(|s| s.parse::<f64>().map_err(|_| Error::Format { offset: 0, message: format!("bad number {s:?}") }))
                .transpose()
        };
        let noisy = match j.noise.as_str() {
            "noisy" => true,
            "clean" => false,
            other => {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("bad noise value {other:?}"),
                })
            }
        };
        Ok(ResultRow {
            modalities: j.modalities.parse()?,
            task: j.task.parse()?,
            noisy,
            seed: j.seed,
            id_acc: num(j.id_acc)?,
            gender_acc: num(j.gender_acc)?,
            paper_ref_id: num(j.paper_ref_id)?,
            paper_ref_gender: num(j.paper_ref_gender)?,
            train_time_s: 0.0,
        })
    }
}
