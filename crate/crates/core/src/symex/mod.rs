//! Dynamic symbolic execution over [`IrProgram`]s with control-flow and
//! data-flow bookkeeping.
//!
//! [`extract_feature_models`] explores every feasible path of a product and
//! returns, per terminated path, its call sequences and path condition, plus
//! the store-load and store-store pairs observed along terminated paths.

mod atom;
mod engine;
mod feasible;
mod value;

use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flc::{FeatureExpr, IrProgram, SrcLoc, DEFAULT_LOOP_BOUND};

pub use atom::{atoms_of, AtomicConstraint, Relation};
pub use engine::{Engine, InstRef, PathState, StepOutput};
pub use feasible::{check_extension, check_feasibility, Feasibility, DEFAULT_FEASIBILITY_BUDGET};
pub use value::{apply, display_name, SymOp, SymValue, SymVar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymexError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("no path of product `{0}` terminated")]
    NoPaths(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchOrder {
    Dfs,
    Bfs,
}

/// How store/load addresses are grouped when matching dependencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreKeyMode {
    /// Whole memory object: every element of an array shares one key.
    BaseAddress,
    ObjectOffset,
}

impl fmt::Display for StoreKeyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoreKeyMode::BaseAddress => "base-address",
            StoreKeyMode::ObjectOffset => "object-offset",
        })
    }
}

impl std::str::FromStr for StoreKeyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "base-address" => Ok(StoreKeyMode::BaseAddress),
            "object-offset" => Ok(StoreKeyMode::ObjectOffset),
            _ => Err(format!("unknown store key mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub timeout_secs: f64,
    pub max_paths: usize,
    /// Number of longest call sequences kept per normal path.
    pub longest: usize,
    pub loop_bound: i64,
    pub search: SearchOrder,
    pub store_key_mode: StoreKeyMode,
    pub feasibility_budget: u64,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            timeout_secs: 60.0,
            max_paths: 10_000,
            longest: 10,
            loop_bound: DEFAULT_LOOP_BOUND,
            search: SearchOrder::Dfs,
            store_key_mode: StoreKeyMode::BaseAddress,
            feasibility_budget: DEFAULT_FEASIBILITY_BUDGET,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), SymexError> {
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(SymexError::Config("timeout must be positive".into()));
        }
        if self.longest < 1 {
            return Err(SymexError::Config("L must be at least 1".into()));
        }
        if self.max_paths < 1 {
            return Err(SymexError::Config("max-paths must be at least 1".into()));
        }
        if self.loop_bound < 1 {
            return Err(SymexError::Config("loop bound must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallEntry {
    pub function: String,
    pub loc: SrcLoc,
}

/// Functions entered on a path, outermost first. Each entry carries the
/// callsite location; the entry function carries its definition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallSequence {
    pub entries: Vec<CallEntry>,
}

impl CallSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.function.as_str())
    }
}

impl fmt::Display for CallSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            write!(f, "{}@{}", e.function, e.loc)?;
        }
        Ok(())
    }
}

/// The `l` longest sequences, longest first; equal lengths are ordered by
/// their serialization so the cut is deterministic.
pub fn choose_longest(seqs: &[CallSequence], l: usize) -> Vec<CallSequence> {
    let mut keyed: Vec<(usize, String, &CallSequence)> = seqs.iter().map(|s| (s.len(), s.to_string(), s)).collect();
    keyed.sort_by(|a, b| (Reverse(a.0), &a.1).cmp(&(Reverse(b.0), &b.1)));
    keyed.dedup_by(|a, b| a.1 == b.1);
    keyed.into_iter().take(l).map(|(_, _, s)| s.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Active,
    Normal,
    Failure,
    BoundExhausted,
}

impl fmt::Display for PathStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathStatus::Active => "active",
            PathStatus::Normal => "normal",
            PathStatus::Failure => "failure",
            PathStatus::BoundExhausted => "bound_exhausted",
        })
    }
}

/// One terminated path.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    /// Termination order.
    pub id: usize,
    pub status: PathStatus,
    pub spec_id: Option<String>,
    pub diagnostic: Option<String>,
    pub call_sequences: Vec<CallSequence>,
    /// Sorted by canonical text, without duplicates.
    pub atoms: Vec<AtomicConstraint>,
    pub over_approx: bool,
}

impl PathOutcome {
    pub fn atom_texts(&self) -> Vec<String> {
        self.atoms.iter().map(|a| a.text().to_string()).collect()
    }

    /// Whether `assign` (by display name) satisfies every atom.
    pub fn satisfied_by(&self, assign: &dyn Fn(&SymVar) -> Option<i64>) -> bool {
        self.atoms.iter().all(|a| a.eval(assign) == Some(true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepKind {
    SL,
    SS,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::SL => "SL",
            DepKind::SS => "SS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DepEndpoint {
    pub loc: SrcLoc,
    pub presence: FeatureExpr,
    pub function: String,
    pub inst: InstRef,
}

/// A store followed by a load (SL) or another store (SS) of the same key
/// with no store to that key in between.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DepPair {
    pub kind: DepKind,
    /// Qualified object identifier (`g`, or `f::x` for locals).
    pub object: String,
    pub src: DepEndpoint,
    pub dst: DepEndpoint,
}

impl DepPair {
    pub fn key(&self) -> (DepKind, SrcLoc, SrcLoc, String) {
        (
            self.kind,
            self.src.loc.clone(),
            self.dst.loc.clone(),
            self.object.clone(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub instructions: u64,
    pub forks: u64,
    pub infeasible: u64,
    pub unknown_checks: u64,
}

#[derive(Debug, Clone)]
pub struct ExtractResult {
    pub product: String,
    pub paths: Vec<PathOutcome>,
    /// Deduplicated by (kind, src-loc, dst-loc, object) and sorted.
    pub ss: Vec<DepPair>,
    pub sl: Vec<DepPair>,
    pub truncated: bool,
    pub stats: EngineStats,
}

impl ExtractResult {
    pub fn with_status(&self, status: PathStatus) -> impl Iterator<Item = &PathOutcome> {
        self.paths.iter().filter(move |p| p.status == status)
    }

    pub fn normal_paths(&self) -> impl Iterator<Item = &PathOutcome> {
        self.with_status(PathStatus::Normal)
    }

    pub fn fail_paths(&self) -> impl Iterator<Item = &PathOutcome> {
        self.with_status(PathStatus::Failure)
    }
}

/// Explores `program` exhaustively (up to the configured limits).
pub fn extract_feature_models(program: &IrProgram, config: &EngineConfig) -> Result<ExtractResult, SymexError> {
    config.validate()?;
    Engine::new(program, config.clone()).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn arc_str(s: &str) -> Arc<str> {
        Arc::from(s)
    }

    fn seq(names: &[&str]) -> CallSequence {
        CallSequence {
            entries: names
                .iter()
                .enumerate()
                .map(|(i, n)| CallEntry {
                    function: n.to_string(),
                    loc: SrcLoc {
                        file: arc_str("t.flc"),
                        line: i as u32 + 1,
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn choose_longest_keeps_longest() {
        let s = [seq(&["a", "b", "c"]), seq(&["a", "b", "c", "d", "e"]), seq(&["a"; 7])];
        let kept = choose_longest(&s, 2);
        let lens: Vec<usize> = kept.iter().map(CallSequence::len).collect();
        assert_eq!(lens, [7, 5]);
        assert_eq!(choose_longest(&s[..1], 10).len(), 1);
    }

    #[test]
    fn choose_longest_ties_break_lexicographically() {
        let s = [seq(&["m", "z"]), seq(&["m", "b"]), seq(&["m", "k"])];
        let kept = choose_longest(&s, 2);
        assert_eq!(kept[0].entries[1].function, "b");
        assert_eq!(kept[1].entries[1].function, "k");
        let mut rev = s.to_vec();
        rev.reverse();
        assert_eq!(choose_longest(&rev, 2), kept);
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        let bad = EngineConfig {
            longest: 0,
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
