//! On-disk corpus layout.
//!
//! A corpus directory holds `NNNN_a.pgm` / `NNNN_b.pgm` for every item,
//! `labels.csv` with an `index,label,defect_type` header, and `corpus.json`
//! recording how the corpus was generated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{read_pgm, write_pgm, PgmError};
use crate::mlp::Label;
use crate::pipeline::{PipelineError, SequencedPair};
use crate::synthgen::{CorpusItem, FramePair, SynthSpec};

pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "corpus.json";
const LABELS_HEADER: &str = "index,label,defect_type";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    #[error("{path}:{line}: {message}")]
    Labels {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("views of item {index} differ in size")]
    ViewSizeMismatch { index: usize },
}

/// Generation parameters written next to the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub base: SynthSpec,
    pub n: usize,
    pub defect_fraction: f64,
    pub seed: u64,
}

/// One row of `labels.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub index: usize,
    pub label: Label,
    pub defect_type: String,
}

pub fn frame_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{index:04}_a.pgm")),
        dir.join(format!("{index:04}_b.pgm")),
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes frames, labels and manifest into `dir`, creating it if needed.
pub fn write_corpus(dir: &Path, items: &[CorpusItem], manifest: &CorpusManifest) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut labels = String::from(LABELS_HEADER);
    labels.push('\n');
    for (index, item) in items.iter().enumerate() {
        let (pa, pb) = frame_paths(dir, index);
        fs::write(&pa, write_pgm(&item.pair.a)).map_err(io_err(&pa))?;
        fs::write(&pb, write_pgm(&item.pair.b)).map_err(io_err(&pb))?;
        labels.push_str(&format!("{index},{},{}\n", u8::from(item.label), item.defect.name()));
    }
    let labels_path = dir.join(LABELS_FILE);
    fs::write(&labels_path, labels).map_err(io_err(&labels_path))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    json.push(b'\n');
    fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    Ok(())
}

pub fn read_labels(dir: &Path) -> Result<Vec<LabelRow>, CorpusError> {
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let bad = |line: usize, message: String| CorpusError::Labels {
        path: path.clone(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == LABELS_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        let index = fields[0]
            .parse::<usize>()
            .map_err(|e| bad(line_no, format!("bad index {:?}: {e}", fields[0])))?;
        let label = fields[1]
            .parse::<u8>()
            .map_err(|e| e.to_string())
            .and_then(Label::try_from)
            .map_err(|e| bad(line_no, e))?;
        rows.push(LabelRow {
            index,
            label,
            defect_type: fields[2].to_owned(),
        });
    }
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest, CorpusError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    serde_json::from_slice(&bytes).map_err(|e| CorpusError::Manifest {
        path,
        message: e.to_string(),
    })
}

pub fn read_pgm_file(path: &Path) -> Result<crate::image::GrayImage, CorpusError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    read_pgm(&bytes).map_err(|source| CorpusError::Pgm {
        path: path.to_owned(),
        source,
    })
}

pub fn read_pair(dir: &Path, index: usize) -> Result<FramePair, CorpusError> {
    let (pa, pb) = frame_paths(dir, index);
    let a = read_pgm_file(&pa)?;
    let b = read_pgm_file(&pb)?;
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(CorpusError::ViewSizeMismatch { index });
    }
    Ok(FramePair { a, b })
}

/// Loads every labeled pair, in `labels.csv` order.
pub fn read_corpus(dir: &Path) -> Result<Vec<(FramePair, Label)>, CorpusError> {
    read_labels(dir)?
        .into_iter()
        .map(|row| Ok((read_pair(dir, row.index)?, row.label)))
        .collect()
}

/// Lazily reads pairs for streaming. The sequence id is the corpus index;
/// unreadable frames surface as [`PipelineError::Frame`].
pub fn stream_source(dir: &Path) -> Result<impl Iterator<Item = Result<SequencedPair, PipelineError>>, CorpusError> {
    let rows = read_labels(dir)?;
    let dir = dir.to_owned();
    Ok(rows.into_iter().map(move |row| {
        let seq = row.index as u64;
        read_pair(&dir, row.index)
            .map(|pair| SequencedPair { seq, pair })
            .map_err(|e| PipelineError::Frame {
                seq,
                message: e.to_string(),
            })
    }))
}
