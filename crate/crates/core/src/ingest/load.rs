use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::record::StoryboardRecord;
use super::split::Split;
use crate::io::write_atomic;
use crate::types::Storyboard;
use crate::validate::{validate, ValidationReport};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Schema {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: {message}")]
    Manifest {
        file: PathBuf,
        line: usize,
        message: String,
    },
}

/// Where a storyboard was read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub file: PathBuf,
    pub line: usize,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.line)
    }
}

/// Storyboards in manifest order with their optional split tags.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub storyboards: Vec<Storyboard>,
    pub origins: Vec<Origin>,
    pub tags: Vec<Option<Split>>,
}

impl Dataset {
    /// Storyboards that fail validation, with their reports.
    pub fn violations(&self) -> Vec<(usize, ValidationReport)> {
        self.storyboards
            .iter()
            .enumerate()
            .map(|(i, sb)| (i, validate(sb)))
            .filter(|(_, r)| !r.is_valid())
            .collect()
    }
}

fn schema_err(file: &Path, line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads one record file. `.jsonl` holds one record per line; any other
/// extension holds a single record or an array of records.
pub fn load_file(path: &Path) -> Result<Vec<(Storyboard, Origin)>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        file: path.to_path_buf(),
        source,
    })?;
    let origin = |line| Origin {
        file: path.to_path_buf(),
        line,
    };
    let mut out = Vec::new();
    if path.extension().is_some_and(|e| e == "jsonl") {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoryboardRecord =
                serde_json::from_str(line).map_err(|e| schema_err(path, i + 1, e.to_string()))?;
            let sb = rec.into_storyboard().map_err(|m| schema_err(path, i + 1, m))?;
            out.push((sb, origin(i + 1)));
        }
    } else {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| schema_err(path, e.line(), e.to_string()))?;
        let items = match value {
            serde_json::Value::Array(items) => items,
            v => vec![v],
        };
        for item in items {
            let rec: StoryboardRecord =
                serde_json::from_value(item).map_err(|e| schema_err(path, 1, e.to_string()))?;
            let sb = rec.into_storyboard().map_err(|m| schema_err(path, 1, m))?;
            out.push((sb, origin(1)));
        }
    }
    Ok(out)
}

/// Reads a manifest: one `path [split]` entry per line, `#` starts a comment,
/// paths are relative to the manifest's directory.
pub fn load_manifest(manifest: &Path) -> Result<Dataset, IngestError> {
    let text = fs::read_to_string(manifest).map_err(|source| IngestError::Io {
        file: manifest.to_path_buf(),
        source,
    })?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let mut ds = Dataset::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let file = root.join(parts.next().unwrap());
        let tag = match parts.next() {
            None => None,
            Some(s) => Some(s.parse::<Split>().map_err(|message| IngestError::Manifest {
                file: manifest.to_path_buf(),
                line: i + 1,
                message,
            })?),
        };
        if parts.next().is_some() {
            return Err(IngestError::Manifest {
                file: manifest.to_path_buf(),
                line: i + 1,
                message: "expected `path [split]`".into(),
            });
        }
        for (sb, origin) in load_file(&file)? {
            ds.storyboards.push(sb);
            ds.origins.push(origin);
            ds.tags.push(tag);
        }
    }
    Ok(ds)
}

/// One compact JSON record per line.
pub fn to_jsonl(storyboards: &[Storyboard]) -> String {
    let mut out = String::new();
    for sb in storyboards {
        out.push_str(&serde_json::to_string(&StoryboardRecord::from_storyboard(sb)).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes storyboards as JSON lines, atomically.
pub fn save(path: &Path, storyboards: &[Storyboard]) -> Result<(), IngestError> {
    write_atomic(path, to_jsonl(storyboards).as_bytes()).map_err(|source| IngestError::Io {
        file: path.to_path_buf(),
        source,
    })
}
