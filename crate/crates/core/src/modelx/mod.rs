//! Model materialization: metadata-variable instrumentation, path and
//! dependency records, trace cleaning, and the JSON-Lines corpus format.

mod annotate;
mod clean;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flc::FeatureExpr;
use crate::symex::{CallSequence, DepKind, DepPair, PathOutcome, PathStatus};

pub use annotate::{annotate_metadata_vars, metadata_var_name};
pub use clean::{clean_records, clean_trace, CleanStats, ExclusionList, DEFAULT_EXCLUSIONS};

#[derive(Debug, Error)]
pub enum ModelxError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("heterogeneous corpus")]
    Heterogeneous,
}

/// `[function, file, line]` of one call-sequence entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallFrame(pub String, pub String, pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Normal,
    Failure,
}

/// One terminated path, in corpus form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub product: String,
    pub spec_id: Option<String>,
    pub status: RecordStatus,
    pub call_sequences: Vec<Vec<CallFrame>>,
    /// Canonical atom texts, sorted and deduplicated.
    pub atoms: Vec<String>,
    pub over_approx: bool,
}

impl PathRecord {
    /// Corpus record of a normal or failing path; paths that exhausted the
    /// loop bound have none.
    pub fn from_outcome(product: &str, p: &PathOutcome) -> Option<PathRecord> {
        let status = match p.status {
            PathStatus::Normal => RecordStatus::Normal,
            PathStatus::Failure => RecordStatus::Failure,
            _ => return None,
        };
        let mut atoms = p.atom_texts();
        atoms.sort();
        atoms.dedup();
        Some(PathRecord {
            product: product.to_string(),
            spec_id: p.spec_id.clone(),
            status,
            call_sequences: p.call_sequences.iter().map(frames_of).collect(),
            atoms,
            over_approx: p.over_approx,
        })
    }

    pub fn is_failure(&self) -> bool {
        self.status == RecordStatus::Failure
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.is_failure() && self.call_sequences.len() != 1 {
            return Err("failure record must have exactly one call sequence".into());
        }
        if self.call_sequences.is_empty() || self.call_sequences.iter().any(Vec::is_empty) {
            return Err("empty call sequence".into());
        }
        if self.atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err("atoms not sorted and unique".into());
        }
        Ok(())
    }
}

pub fn frames_of(seq: &CallSequence) -> Vec<CallFrame> {
    seq.entries
        .iter()
        .map(|e| CallFrame(e.function.clone(), e.loc.file.to_string(), e.loc.line))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Access {
    #[serde(rename = "s")]
    Store,
    #[serde(rename = "l")]
    Load,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepEnd {
    pub file: String,
    pub line: u32,
    pub presence: FeatureExpr,
    /// Enclosing function.
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepRecord {
    pub product: String,
    pub kind: DepKind,
    pub src: DepEnd,
    pub dst: DepEnd,
    pub object: String,
    pub src_access: Access,
    pub dst_access: Access,
}

impl DepRecord {
    pub fn from_pair(product: &str, p: &DepPair) -> DepRecord {
        let end = |e: &crate::symex::DepEndpoint| DepEnd {
            file: e.loc.file.to_string(),
            line: e.loc.line,
            presence: e.presence.clone(),
            function: e.function.clone(),
        };
        DepRecord {
            product: product.to_string(),
            kind: p.kind,
            src: end(&p.src),
            dst: end(&p.dst),
            object: p.object.clone(),
            src_access: Access::Store,
            dst_access: match p.kind {
                DepKind::SL => Access::Load,
                DepKind::SS => Access::Store,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = self.src_access == Access::Store
            && match self.kind {
                DepKind::SL => self.dst_access == Access::Load,
                DepKind::SS => self.dst_access == Access::Store,
            };
        if ok {
            Ok(())
        } else {
            Err(format!("access kinds inconsistent with {}", self.kind))
        }
    }

    /// Identity used to merge the same dependency seen in several products.
    pub fn location_key(&self) -> (DepKind, String, u32, String, u32, String) {
        (
            self.kind,
            self.src.file.clone(),
            self.src.line,
            self.dst.file.clone(),
            self.dst.line,
            self.object.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Path(PathRecord),
    Dep(DepRecord),
}

/// Renders records as JSON Lines.
pub fn to_jsonl(records: &[Record]) -> Result<String, ModelxError> {
    let kinds = records
        .iter()
        .map(|r| matches!(r, Record::Path(_)))
        .collect::<std::collections::BTreeSet<bool>>();
    if kinds.len() > 1 {
        return Err(ModelxError::Heterogeneous);
    }
    let mut out = String::new();
    for r in records {
        let line = match r {
            Record::Path(p) => serde_json::to_string(p),
            Record::Dep(d) => serde_json::to_string(d),
        }
        .expect("records serialize");
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Writes a corpus file, one record per line.
pub fn emit_corpus(records: &[Record], path: &Path) -> Result<(), ModelxError> {
    let text = to_jsonl(records)?;
    write_atomic(path, text.as_bytes())
}

pub fn emit_paths(records: &[PathRecord], path: &Path) -> Result<(), ModelxError> {
    let rs: Vec<Record> = records.iter().cloned().map(Record::Path).collect();
    emit_corpus(&rs, path)
}

pub fn emit_deps(records: &[DepRecord], path: &Path) -> Result<(), ModelxError> {
    let rs: Vec<Record> = records.iter().cloned().map(Record::Dep).collect();
    emit_corpus(&rs, path)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ModelxError> {
    let text = fs::read_to_string(path).map_err(|source| ModelxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ModelxError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_paths(path: &Path) -> Result<Vec<PathRecord>, ModelxError> {
    let recs: Vec<PathRecord> = read_jsonl(path)?;
    for (i, r) in recs.iter().enumerate() {
        r.validate().map_err(|message| ModelxError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
    }
    Ok(recs)
}

pub fn read_deps(path: &Path) -> Result<Vec<DepRecord>, ModelxError> {
    let recs: Vec<DepRecord> = read_jsonl(path)?;
    for (i, r) in recs.iter().enumerate() {
        r.validate().map_err(|message| ModelxError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
    }
    Ok(recs)
}

/// Replaces `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelxError> {
    let io = |source| ModelxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
