//! Corpus file format: a version header line followed by one JSON record
//! per sample.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::sample::{validate_sample, EpcSample};

pub const CORPUS_FORMAT: &str = "epcforge-corpus-v1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a corpus file: first line {found:?}, expected {CORPUS_FORMAT:?}")]
    BadHeader { path: String, found: String },
    #[error("{path} line {line}: {msg}")]
    BadRecord {
        path: String,
        line: usize,
        msg: String,
    },
}

pub fn save_corpus(path: &Path, corpus: &[EpcSample]) -> Result<(), PersistError> {
    let io_err = |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CORPUS_FORMAT}").map_err(io_err)?;
    for sample in corpus {
        let line = serde_json::to_string(sample).expect("samples serialize");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Loads and eagerly validates every record; a malformed line reports its
/// line number and the offending field.
pub fn load_corpus(path: &Path) -> Result<Vec<EpcSample>, PersistError> {
    let text = fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line.trim() == CORPUS_FORMAT => {}
        other => {
            return Err(PersistError::BadHeader {
                path: path.display().to_string(),
                found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let sample: EpcSample =
            serde_json::from_str(line).map_err(|e| PersistError::BadRecord {
                path: path.display().to_string(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        validate_sample(&sample).map_err(|e| PersistError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}
