//! JSONL and text artifact helpers. Every artifact written by the pipeline
//! carries the hash of the configuration that produced it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_owned(), source }
}

/// A record with the producing configuration's hash alongside its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub record: T,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r).expect("records serialize");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_stamped_jsonl<T: Serialize>(
    path: &Path,
    config_hash: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<(), ArtifactError> {
    write_jsonl(
        path,
        records.into_iter().map(|record| Stamped { config_hash: config_hash.to_owned(), record }),
    )
}

/// Appends one line and flushes, for resumable outputs.
pub fn append_jsonl<T: Serialize>(file: &mut fs::File, path: &Path, record: &T) -> Result<(), ArtifactError> {
    let mut line = serde_json::to_vec(record).expect("records serialize");
    line.push(b'\n');
    file.write_all(&line).map_err(io_err(path))?;
    file.flush().map_err(io_err(path))
}

/// Reads every non-blank line; the first malformed line is fatal.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ArtifactError::Malformed {
                path: path.to_owned(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Malformed {
        path: path.to_owned(),
        line: e.line(),
        reason: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Text artifact with a leading `# config_hash: …` line.
pub fn write_stamped_text(path: &Path, config_hash: &str, text: &str) -> Result<(), ArtifactError> {
    write_text(path, &format!("# config_hash: {config_hash}\n{text}"))
}
