//! Maps dependency endpoints to features, either through the presence
//! conditions of the directives enclosing them or through role-annotated
//! function names (`<base>__role__<Feature>`).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flc::feature::is_feature_name;
use crate::flc::FeatureExpr;
use crate::modelx::{write_atomic, Access, DepRecord, ModelxError};
use crate::symex::DepKind;

pub const DEFAULT_ROLE_SEPARATOR: &str = "__role__";

pub const CSV_HEADER: &str = "kind,src_file,src_line,src_presence,dst_file,dst_line,dst_presence,src_access,dst_access";

#[derive(Debug, Error)]
pub enum FeatlocError {
    #[error("malformed role in function name `{function}`")]
    MalformedRole { function: String },
    #[error("feature dependency CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] ModelxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocateMode {
    Directive,
    Name,
}

impl std::str::FromStr for LocateMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "directive" => Ok(LocateMode::Directive),
            "name" => Ok(LocateMode::Name),
            _ => Err(format!("unknown locate mode `{s}`")),
        }
    }
}

impl fmt::Display for LocateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocateMode::Directive => "directive",
            LocateMode::Name => "name",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureDepRecord {
    pub source: FeatureExpr,
    pub dest: FeatureExpr,
    pub kind: DepKind,
    pub src_access: Access,
    pub dst_access: Access,
    pub src_loc: (String, u32),
    pub dst_loc: (String, u32),
}

impl FeatureDepRecord {
    fn new(dep: &DepRecord, source: FeatureExpr, dest: FeatureExpr) -> FeatureDepRecord {
        FeatureDepRecord {
            source,
            dest,
            kind: dep.kind,
            src_access: dep.src_access,
            dst_access: dep.dst_access,
            src_loc: (dep.src.file.clone(), dep.src.line),
            dst_loc: (dep.dst.file.clone(), dep.dst.line),
        }
    }
}

/// Labels both endpoints with their presence conditions; `None` when either
/// endpoint is top-level code.
pub fn locate_by_directive(dep: &DepRecord) -> Option<FeatureDepRecord> {
    if dep.src.presence.is_true() || dep.dst.presence.is_true() {
        return None;
    }
    Some(FeatureDepRecord::new(
        dep,
        dep.src.presence.clone(),
        dep.dst.presence.clone(),
    ))
}

/// Feature named by the role suffix of `function`, if it has one.
pub fn role_feature(function: &str, separator: &str) -> Result<Option<String>, FeatlocError> {
    let Some(at) = function.rfind(separator) else {
        return Ok(None);
    };
    let feature = &function[at + separator.len()..];
    if at == 0 || !is_feature_name(feature) {
        return Err(FeatlocError::MalformedRole {
            function: function.to_string(),
        });
    }
    Ok(Some(feature.to_string()))
}

/// Labels both endpoints with the feature of their enclosing role function;
/// `None` when either function carries no role.
pub fn locate_by_name(dep: &DepRecord, separator: &str) -> Result<Option<FeatureDepRecord>, FeatlocError> {
    let src = role_feature(&dep.src.function, separator)?;
    let dst = role_feature(&dep.dst.function, separator)?;
    Ok(match (src, dst) {
        (Some(s), Some(d)) => Some(FeatureDepRecord::new(dep, FeatureExpr::atom(s), FeatureExpr::atom(d))),
        _ => None,
    })
}

pub fn locate(dep: &DepRecord, mode: LocateMode, separator: &str) -> Result<Option<FeatureDepRecord>, FeatlocError> {
    match mode {
        LocateMode::Directive => Ok(locate_by_directive(dep)),
        LocateMode::Name => locate_by_name(dep, separator),
    }
}

pub fn locate_all(
    deps: &[DepRecord],
    mode: LocateMode,
    separator: &str,
) -> Result<Vec<FeatureDepRecord>, FeatlocError> {
    let mut out = Vec::new();
    for d in deps {
        if let Some(r) = locate(d, mode, separator)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Counts of feature-relevant (FR) and not-relevant (NFR) endpoints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Buckets {
    pub fr_fr: usize,
    pub fr_nfr: usize,
    pub nfr_fr: usize,
    pub nfr_nfr: usize,
}

impl Buckets {
    pub fn total(&self) -> usize {
        self.fr_fr + self.fr_nfr + self.nfr_fr + self.nfr_nfr
    }

    fn add(&mut self, src: bool, dst: bool) {
        match (src, dst) {
            (true, true) => self.fr_fr += 1,
            (true, false) => self.fr_nfr += 1,
            (false, true) => self.nfr_fr += 1,
            (false, false) => self.nfr_nfr += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RelevanceTally {
    pub sl: Buckets,
    pub ss: Buckets,
}

impl RelevanceTally {
    pub fn of(&self, kind: DepKind) -> &Buckets {
        match kind {
            DepKind::SL => &self.sl,
            DepKind::SS => &self.ss,
        }
    }
}

pub fn classify_relevance(
    deps: &[DepRecord],
    mode: LocateMode,
    separator: &str,
) -> Result<RelevanceTally, FeatlocError> {
    let mut tally = RelevanceTally::default();
    for d in deps {
        let (s, t) = match mode {
            LocateMode::Directive => (!d.src.presence.is_true(), !d.dst.presence.is_true()),
            LocateMode::Name => (
                role_feature(&d.src.function, separator)?.is_some(),
                role_feature(&d.dst.function, separator)?.is_some(),
            ),
        };
        match d.kind {
            DepKind::SL => tally.sl.add(s, t),
            DepKind::SS => tally.ss.add(s, t),
        }
    }
    Ok(tally)
}

fn access_str(a: Access) -> &'static str {
    match a {
        Access::Store => "s",
        Access::Load => "l",
    }
}

pub fn to_csv(records: &[FeatureDepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.kind,
            r.src_loc.0,
            r.src_loc.1,
            r.source.compact(),
            r.dst_loc.0,
            r.dst_loc.1,
            r.dest.compact(),
            access_str(r.src_access),
            access_str(r.dst_access),
        ));
    }
    out
}

pub fn write_csv(records: &[FeatureDepRecord], path: &Path) -> Result<(), FeatlocError> {
    Ok(write_atomic(path, to_csv(records).as_bytes())?)
}

pub fn parse_csv(text: &str) -> Result<Vec<FeatureDepRecord>, FeatlocError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(FeatlocError::Csv {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let err = |message: String| FeatlocError::Csv { line: i + 1, message };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        }
        let kind = match f[0] {
            "SL" => DepKind::SL,
            "SS" => DepKind::SS,
            k => return Err(err(format!("unknown kind `{k}`"))),
        };
        let line_no = |s: &str| s.parse::<u32>().map_err(|e| err(format!("bad line `{s}`: {e}")));
        let expr = |s: &str| FeatureExpr::parse(s).map_err(|e| err(e.to_string()));
        let access = |s: &str| match s {
            "s" => Ok(Access::Store),
            "l" => Ok(Access::Load),
            _ => Err(err(format!("unknown access `{s}`"))),
        };
        out.push(FeatureDepRecord {
            kind,
            src_loc: (f[1].to_string(), line_no(f[2])?),
            source: expr(f[3])?,
            dst_loc: (f[4].to_string(), line_no(f[5])?),
            dest: expr(f[6])?,
            src_access: access(f[7])?,
            dst_access: access(f[8])?,
        });
    }
    Ok(out)
}
