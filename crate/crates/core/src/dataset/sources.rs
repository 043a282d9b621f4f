//! Per-modality source pools and their on-disk layout:
//!
//! ```text
//! <root>/ecg/<subject>/<record>.txt        one sample per line
//! <root>/ecg/<subject>/<record>.meta.toml  subject_id, gender, age, rate
//! <root>/face/<identity>/<image>.pgm       (or .ppm / .csv)
//! <root>/finger/<identity>/<image>.pgm
//! <root>/face_genders.csv                  face_identity,gender
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ecg::io::{read_record, write_record};
use crate::ecg::SignalRecord;
use crate::error::{Error, Result};
use crate::types::Gender;
use crate::vision::io::save_pgm;
use crate::vision::{load_image, standardize, Image};

pub const ANNOTATION_FILE: &str = "face_genders.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct EcgSource {
    pub id: String,
    pub gender: Gender,
    pub age: Option<u32>,
    pub records: Vec<SignalRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub id: String,
    pub images: Vec<Image>,
}

/// Everything `build_virtual_subjects` draws from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcePools {
    pub ecg: Vec<EcgSource>,
    pub faces: Vec<ImageSource>,
    pub fingers: Vec<ImageSource>,
    /// Annotated gender of each face identity.
    pub face_genders: BTreeMap<String, Gender>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    face_identity: String,
    gender: String,
}

/// Reads `face_identity,gender` rows (with header).
pub fn read_annotations(path: &Path) -> Result<BTreeMap<String, Gender>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<AnnotationRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let gender = row.gender.parse::<Gender>().map_err(|e| Error::Format {
            offset: 0,
            message: format!("{}: identity {}: {e}", path.display(), row.face_identity),
        })?;
        out.insert(row.face_identity, gender);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map(|p| p.byte() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            offset,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn dir_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_image_sources(dir: &Path, width: usize, height: usize) -> Result<Vec<ImageSource>> {
    let mut out = Vec::new();
    for ident in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let mut images = Vec::new();
        for file in sorted_entries(&ident)?.into_iter().filter(|p| p.is_file()) {
            images.push(standardize(&load_image(&file)?, width, height)?);
        }
        if !images.is_empty() {
            out.push(ImageSource {
                id: dir_name(&ident),
                images,
            });
        }
    }
    Ok(out)
}

/// Loads every source pool under `root`, resizing images to `width × height`.
pub fn load_sources(root: &Path, width: usize, height: usize) -> Result<SourcePools> {
    let mut ecg = Vec::new();
    for subject in sorted_entries(&root.join("ecg"))?.into_iter().filter(|p| p.is_dir()) {
        let mut records = Vec::new();
        for file in sorted_entries(&subject)? {
            if file.extension().is_some_and(|e| e == "txt") {
                records.push(read_record(&file)?);
            }
        }
        let Some(first) = records.first() else { continue };
        ecg.push(EcgSource {
            id: dir_name(&subject),
            gender: first.gender,
            age: first.age,
            records,
        });
    }
    Ok(SourcePools {
        ecg,
        faces: load_image_sources(&root.join("face"), width, height)?,
        fingers: load_image_sources(&root.join("finger"), width, height)?,
        face_genders: read_annotations(&root.join(ANNOTATION_FILE))?,
    })
}

/// Writes pools in the layout [`load_sources`] reads.
pub fn write_sources(root: &Path, pools: &SourcePools) -> Result<()> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    for src in &pools.ecg {
        let dir = root.join("ecg").join(&src.id);
        mkdir(&dir)?;
        for (i, rec) in src.records.iter().enumerate() {
            write_record(&dir.join(format!("r{i:02}.txt")), rec)?;
        }
    }
    for (kind, list) in [("face", &pools.faces), ("finger", &pools.fingers)] {
        for src in list {
            let dir = root.join(kind).join(&src.id);
            mkdir(&dir)?;
            for (i, img) in src.images.iter().enumerate() {
                save_pgm(&dir.join(format!("{i:03}.pgm")), img)?;
            }
        }
    }
    let path = root.join(ANNOTATION_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for (face_identity, &gender) in &pools.face_genders {
        w.serialize(AnnotationRow {
            face_identity: face_identity.clone(),
            gender: gender.to_string(),
        })
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
