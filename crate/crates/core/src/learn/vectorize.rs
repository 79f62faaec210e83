use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::flc::has_instance_suffix;
use crate::modelx::PathRecord;

/// Where document tokens come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    /// Function names of the call sequences.
    Stack,
    /// Canonical atomic constraints of the path condition.
    Constraints,
    Combined,
}

impl TokenSource {
    pub const ALL: [TokenSource; 3] = [TokenSource::Stack, TokenSource::Constraints, TokenSource::Combined];

    fn uses_stack(self) -> bool {
        self != TokenSource::Constraints
    }

    fn uses_atoms(self) -> bool {
        self != TokenSource::Stack
    }
}

impl fmt::Display for TokenSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenSource::Stack => "stack",
            TokenSource::Constraints => "constraints",
            TokenSource::Combined => "combined",
        })
    }
}

impl std::str::FromStr for TokenSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stack" => Ok(TokenSource::Stack),
            "constraints" => Ok(TokenSource::Constraints),
            "combined" => Ok(TokenSource::Combined),
            _ => Err(format!("unknown token source `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Failure,
}

impl Label {
    pub fn is_failure(self) -> bool {
        self == Label::Failure
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDocument {
    pub tokens: Vec<String>,
    pub label: Label,
    pub spec_id: Option<String>,
    pub product: String,
}

/// Replaces `name_<k>` instance names inside an atom by their base name.
pub fn strip_instance_suffixes(atom: &str) -> String {
    let mut out = String::with_capacity(atom.len());
    let mut ident = String::new();
    let flush = |ident: &mut String, out: &mut String| {
        if has_instance_suffix(ident) {
            let cut = ident.rfind('_').unwrap();
            ident.truncate(cut);
        }
        out.push_str(ident);
        ident.clear();
    };
    for c in atom.chars() {
        let starts = c == '_' || c.is_ascii_alphabetic();
        if starts || (!ident.is_empty() && c.is_ascii_digit()) {
            ident.push(c);
        } else {
            flush(&mut ident, &mut out);
            out.push(c);
        }
    }
    flush(&mut ident, &mut out);
    out
}

pub fn document(record: &PathRecord, source: TokenSource) -> TraceDocument {
    let mut tokens = Vec::new();
    if source.uses_stack() {
        for seq in &record.call_sequences {
            tokens.extend(seq.iter().map(|f| f.0.clone()));
        }
    }
    if source.uses_atoms() {
        tokens.extend(record.atoms.iter().map(|a| strip_instance_suffixes(a)));
    }
    TraceDocument {
        tokens,
        label: if record.is_failure() {
            Label::Failure
        } else {
            Label::Normal
        },
        spec_id: record.spec_id.clone(),
        product: record.product.clone(),
    }
}

/// Token to column map, columns in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub source: TokenSource,
    pub tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a TraceDocument>, source: TokenSource) -> Vocabulary {
        let mut set = std::collections::BTreeSet::new();
        for d in docs {
            set.extend(d.tokens.iter().cloned());
        }
        Vocabulary::from_tokens(source, set.into_iter().collect())
    }

    pub fn from_tokens(source: TokenSource, mut tokens: Vec<String>) -> Vocabulary {
        tokens.sort();
        tokens.dedup();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { source, tokens, index }
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    /// Vocabulary reduced to `keep` (tokens not present are ignored).
    pub fn restrict(&self, keep: &[String]) -> Vocabulary {
        let tokens = keep.iter().filter(|t| self.index.contains_key(*t)).cloned().collect();
        Vocabulary::from_tokens(self.source, tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Count vector of `doc`; unknown tokens are dropped.
    pub fn vector(&self, doc: &TraceDocument) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for t in &doc.tokens {
            if let Some(i) = self.column(t) {
                v[i] += 1.0;
            }
        }
        v
    }

    pub fn matrix(&self, docs: &[TraceDocument]) -> Vec<Vec<f64>> {
        docs.iter().map(|d| self.vector(d)).collect()
    }
}

/// Documents of `records` under `source`, checking the corpus can supply
/// that source at all.
pub fn documents(records: &[PathRecord], source: TokenSource) -> Result<Vec<TraceDocument>, LearnError> {
    if records.is_empty() {
        return Err(LearnError::EmptyCorpus);
    }
    if source.uses_atoms() && records.iter().all(|r| r.atoms.is_empty()) {
        return Err(LearnError::MissingAtoms(source));
    }
    Ok(records.iter().map(|r| document(r, source)).collect())
}

/// Count matrix, labels and vocabulary; the vocabulary is built from
/// `records` unless one is supplied.
pub fn vectorize(
    records: &[PathRecord],
    source: TokenSource,
    vocab: Option<&Vocabulary>,
) -> Result<(Vec<Vec<f64>>, Vec<Label>, Vocabulary), LearnError> {
    let docs = documents(records, source)?;
    let vocab = match vocab {
        Some(v) => v.clone(),
        None => Vocabulary::build(&docs, source),
    };
    let x = vocab.matrix(&docs);
    let y = docs.iter().map(|d| d.label).collect();
    Ok((x, y, vocab))
}
