//! Association-rule mining over feature dependencies: item encoding,
//! level-wise Apriori with exact supports, rule derivation, self-dependency
//! filtering and the rules report.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featloc::FeatureDepRecord;
use crate::flc::FeatureExpr;
use crate::modelx::{write_atomic, Access, ModelxError};
use crate::symex::DepKind;

pub const DEFAULT_MIN_SUPPORT: f64 = 0.01;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.6;
pub const REPORT_HEADER: &str = "lhs,rhs,direction,support,confidence";

#[derive(Debug, Error)]
pub enum MineError {
    #[error("malformed item `{text}`: {message}")]
    Item { text: String, message: String },
    #[error("threshold {name} must be in (0, 1], got {value}")]
    Threshold { name: &'static str, value: f64 },
    #[error("itemset corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] ModelxError),
}

/// Exact non-negative fraction `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self >= threshold`, with the threshold given as a float.
    pub fn at_least(self, threshold: f64) -> bool {
        self.to_f64() >= threshold
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Ratio) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Ratio) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Ratio) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Source,
    Destination,
}

/// One side of a feature dependency as a mining item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedItem {
    pub expr: FeatureExpr,
    pub role: Role,
    pub kind: DepKind,
    pub access: Access,
}

impl EncodedItem {
    pub fn text(&self) -> String {
        self.to_string()
    }

    /// Parses `<expr>_<Source|Destination>_{Store_Store|Store_Load}_<Store|Load>`,
    /// reading the fixed segments from the right.
    pub fn parse(text: &str) -> Result<EncodedItem, MineError> {
        let err = |message: &str| MineError::Item {
            text: text.to_string(),
            message: message.to_string(),
        };
        let (rest, access) = if let Some(r) = text.strip_suffix("_Store") {
            (r, Access::Store)
        } else if let Some(r) = text.strip_suffix("_Load") {
            (r, Access::Load)
        } else {
            return Err(err("missing access segment"));
        };
        let (rest, kind) = if let Some(r) = rest.strip_suffix("_{Store_Store}") {
            (r, DepKind::SS)
        } else if let Some(r) = rest.strip_suffix("_{Store_Load}") {
            (r, DepKind::SL)
        } else {
            return Err(err("missing or malformed dependency-kind segment"));
        };
        let (rest, role) = if let Some(r) = rest.strip_suffix("_Source") {
            (r, Role::Source)
        } else if let Some(r) = rest.strip_suffix("_Destination") {
            (r, Role::Destination)
        } else {
            return Err(err("missing role segment"));
        };
        if rest.is_empty() || rest.contains(char::is_whitespace) {
            return Err(err("malformed feature expression"));
        }
        let expr = FeatureExpr::parse(rest).map_err(|e| err(&e.to_string()))?;
        let item = EncodedItem {
            expr,
            role,
            kind,
            access,
        };
        if item.text() != text {
            return Err(err("not in canonical form"));
        }
        Ok(item)
    }
}

impl fmt::Display for EncodedItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Source => "Source",
            Role::Destination => "Destination",
        };
        let kind = match self.kind {
            DepKind::SS => "Store_Store",
            DepKind::SL => "Store_Load",
        };
        let access = match self.access {
            Access::Store => "Store",
            Access::Load => "Load",
        };
        write!(f, "{}_{role}_{{{kind}}}_{access}", self.expr.compact())
    }
}

/// The two items of one feature dependency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSetRecord {
    pub items: Vec<String>,
}

pub fn encode(rec: &FeatureDepRecord) -> ItemSetRecord {
    let src = EncodedItem {
        expr: rec.source.clone(),
        role: Role::Source,
        kind: rec.kind,
        access: Access::Store,
    };
    let dst = EncodedItem {
        expr: rec.dest.clone(),
        role: Role::Destination,
        kind: rec.kind,
        access: rec.dst_access,
    };
    ItemSetRecord {
        items: vec![src.text(), dst.text()],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemset {
    /// Sorted.
    pub items: Vec<String>,
    pub count: u64,
    pub support: Ratio,
}

fn check_threshold(name: &'static str, value: f64) -> Result<(), MineError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(MineError::Threshold { name, value })
    }
}

/// All itemsets of at most `max_size` items whose support reaches
/// `min_support`, ordered by size and then by items.
pub fn apriori<S: AsRef<str>>(
    records: &[Vec<S>],
    min_support: f64,
    max_size: usize,
) -> Result<Vec<FrequentItemset>, MineError> {
    check_threshold("min-support", min_support)?;
    if records.is_empty() {
        log::warn!("apriori on an empty record list");
        return Ok(Vec::new());
    }
    let total = records.len() as u64;
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        names.extend(r.iter().map(AsRef::as_ref));
    }
    let names: Vec<&str> = names.into_iter().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let txs: Vec<Vec<usize>> = records
        .iter()
        .map(|r| {
            let s: BTreeSet<usize> = r.iter().map(|x| index[x.as_ref()]).collect();
            s.into_iter().collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut level: Vec<Vec<usize>> = (0..names.len()).map(|i| vec![i]).collect();
    for size in 1..=max_size {
        if level.is_empty() {
            break;
        }
        let mut counts = vec![0u64; level.len()];
        for t in &txs {
            for (c, cand) in counts.iter_mut().zip(&level) {
                if is_subset(cand, t) {
                    *c += 1;
                }
            }
        }
        let mut frequent: Vec<Vec<usize>> = Vec::new();
        for (cand, count) in level.into_iter().zip(counts) {
            let support = Ratio::new(count, total);
            if count > 0 && support.at_least(min_support) {
                out.push(FrequentItemset {
                    items: cand.iter().map(|&i| names[i].to_string()).collect(),
                    count,
                    support,
                });
                frequent.push(cand);
            }
        }
        if size == max_size {
            break;
        }
        level = next_candidates(&frequent);
    }
    Ok(out)
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Joins frequent `k`-sets sharing a `k-1` prefix and prunes candidates
/// with an infrequent `k`-subset.
fn next_candidates(frequent: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let known: BTreeSet<&[usize]> = frequent.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    for (i, a) in frequent.iter().enumerate() {
        for b in &frequent[i + 1..] {
            let k = a.len();
            if a[..k - 1] != b[..k - 1] {
                continue;
            }
            let mut cand = a.clone();
            cand.push(b[k - 1]);
            cand.sort_unstable();
            let all_frequent = (0..cand.len()).all(|drop| {
                let sub: Vec<usize> = cand
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != drop)
                    .map(|(_, &x)| x)
                    .collect();
                known.contains(sub.as_slice())
            });
            if all_frequent {
                out.push(cand);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationRule {
    pub lhs: Vec<String>,
    pub rhs: Vec<String>,
    pub support: Ratio,
    pub confidence: Ratio,
}

/// Both directions of every frequent pair whose confidence reaches
/// `min_confidence`.
pub fn derive_rules(frequent: &[FrequentItemset], min_confidence: f64) -> Result<Vec<AssociationRule>, MineError> {
    check_threshold("min-confidence", min_confidence)?;
    let singles: BTreeMap<&str, u64> = frequent
        .iter()
        .filter(|f| f.items.len() == 1)
        .map(|f| (f.items[0].as_str(), f.count))
        .collect();
    for f in frequent.iter().filter(|f| f.items.len() == 1) {
        log::debug!("item {} support {}", f.items[0], f.support);
    }
    let mut out = Vec::new();
    for f in frequent.iter().filter(|f| f.items.len() == 2) {
        for (l, r) in [(0, 1), (1, 0)] {
            let lhs_count = singles[f.items[l].as_str()];
            let confidence = Ratio::new(f.count, lhs_count);
            if confidence.at_least(min_confidence) {
                out.push(AssociationRule {
                    lhs: vec![f.items[l].clone()],
                    rhs: vec![f.items[r].clone()],
                    support: f.support,
                    confidence,
                });
            }
        }
    }
    Ok(out)
}

/// Source and destination expressions of a rule, if it has exactly one of each.
pub fn rule_endpoints(lhs: &[String], rhs: &[String]) -> Result<Option<(EncodedItem, EncodedItem)>, MineError> {
    let mut src = None;
    let mut dst = None;
    for t in lhs.iter().chain(rhs) {
        let item = EncodedItem::parse(t)?;
        let slot = match item.role {
            Role::Source => &mut src,
            Role::Destination => &mut dst,
        };
        if slot.is_some() {
            return Ok(None);
        }
        *slot = Some(item);
    }
    Ok(src.zip(dst))
}

/// Drops rules relating a feature expression to itself.
pub fn filter_rules(rules: Vec<AssociationRule>) -> Result<Vec<AssociationRule>, MineError> {
    let mut out = Vec::with_capacity(rules.len());
    for r in rules {
        if let Some((s, d)) = rule_endpoints(&r.lhs, &r.rhs)? {
            if s.expr.structurally_eq(&d.expr) {
                continue;
            }
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Both,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Forward => "⟹",
            Direction::Both => "⟺",
        }
    }
}

/// A rule as reported; a pair kept in both directions is merged into one
/// `⟺` row with the smaller of the two confidences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportedRule {
    pub lhs: String,
    pub rhs: String,
    pub direction: Direction,
    pub support: Ratio,
    pub confidence: Ratio,
}

impl ReportedRule {
    pub fn text(&self) -> String {
        format!("{{{}}} {} {{{}}}", self.lhs, self.direction.symbol(), self.rhs)
    }

    /// `(source, destination)` feature expressions.
    pub fn feature_pair(&self) -> Option<(FeatureExpr, FeatureExpr)> {
        let (s, d) = rule_endpoints(std::slice::from_ref(&self.lhs), std::slice::from_ref(&self.rhs)).ok()??;
        Some((s.expr, d.expr))
    }
}

pub fn merge_directions(rules: &[AssociationRule]) -> Vec<ReportedRule> {
    let side = |v: &[String]| v.join(" ");
    let mut by_pair: BTreeMap<(String, String), Vec<&AssociationRule>> = BTreeMap::new();
    for r in rules {
        let (l, h) = (side(&r.lhs), side(&r.rhs));
        let key = if l <= h { (l, h) } else { (h, l) };
        by_pair.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((a, b), rs) in by_pair {
        let forward = rs.iter().find(|r| side(&r.lhs) == a);
        let backward = rs.iter().find(|r| side(&r.lhs) == b && a != b);
        match (forward, backward) {
            (Some(f), Some(g)) => out.push(ReportedRule {
                lhs: a,
                rhs: b,
                direction: Direction::Both,
                support: f.support,
                confidence: f.confidence.min(g.confidence),
            }),
            _ => {
                for r in rs {
                    out.push(ReportedRule {
                        lhs: side(&r.lhs),
                        rhs: side(&r.rhs),
                        direction: Direction::Forward,
                        support: r.support,
                        confidence: r.confidence,
                    });
                }
            }
        }
    }
    sort_report(&mut out);
    out
}

fn sort_report(rules: &mut Vec<ReportedRule>) {
    rules.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.confidence.cmp(&a.confidence))
            .then_with(|| a.text().cmp(&b.text()))
    });
    rules.dedup_by(|a, b| a.text() == b.text());
}

pub fn report_csv(rules: &[ReportedRule]) -> String {
    let mut rules = rules.to_vec();
    sort_report(&mut rules);
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &rules {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lhs,
            r.rhs,
            r.direction.symbol(),
            r.support,
            r.confidence
        ));
    }
    out
}

pub fn report_rules(rules: &[ReportedRule], path: &Path) -> Result<(), MineError> {
    Ok(write_atomic(path, report_csv(rules).as_bytes())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MineConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_size: usize,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            min_support: DEFAULT_MIN_SUPPORT,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            max_size: 2,
        }
    }
}

/// Encode, mine, derive, filter and merge in one go.
pub fn mine_rules(deps: &[FeatureDepRecord], config: &MineConfig) -> Result<Vec<ReportedRule>, MineError> {
    check_threshold("min-support", config.min_support)?;
    check_threshold("min-confidence", config.min_confidence)?;
    if deps.is_empty() {
        log::warn!("no feature dependencies to mine");
        return Ok(Vec::new());
    }
    let records: Vec<Vec<String>> = deps.iter().map(|d| encode(d).items).collect();
    let frequent = apriori(&records, config.min_support, config.max_size)?;
    let rules = filter_rules(derive_rules(&frequent, config.min_confidence)?)?;
    Ok(merge_directions(&rules))
}

pub fn itemsets_to_jsonl(records: &[ItemSetRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("itemsets serialize") + "\n")
        .collect()
}

pub fn parse_itemsets_jsonl(text: &str) -> Result<Vec<ItemSetRecord>, MineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MineError::Corpus {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fdep(src: &str, dst: &str, kind: DepKind) -> FeatureDepRecord {
        FeatureDepRecord {
            source: FeatureExpr::parse(src).unwrap(),
            dest: FeatureExpr::parse(dst).unwrap(),
            kind,
            src_access: Access::Store,
            dst_access: if kind == DepKind::SL {
                Access::Load
            } else {
                Access::Store
            },
            src_loc: ("f".into(), 1),
            dst_loc: ("f".into(), 2),
        }
    }

    #[test]
    fn encoding_examples() {
        let r = encode(&fdep("LS_RECURSIVE", "LS_SORTFILE", DepKind::SS));
        assert_eq!(
            r.items,
            [
                "LS_RECURSIVE_Source_{Store_Store}_Store",
                "LS_SORTFILE_Destination_{Store_Store}_Store"
            ]
        );
        let r = encode(&fdep("Sign", "Verify", DepKind::SL));
        assert_eq!(r.items[1], "Verify_Destination_{Store_Load}_Load");
        let r = encode(&fdep("A && !B", "C", DepKind::SS));
        assert_eq!(r.items[0], "A&&!B_Source_{Store_Store}_Store");
    }

    #[test]
    fn parse_round_trip_and_rejections() {
        for t in [
            "A&&!B_Source_{Store_Store}_Store",
            "UNEXPAND||UNICODE_SUPPORT_Destination_{Store_Load}_Load",
            "X_Y_Source_{Store_Load}_Store",
        ] {
            assert_eq!(EncodedItem::parse(t).unwrap().text(), t);
        }
        assert!(EncodedItem::parse("A_Source_{Store-Store}_Store").is_err());
        assert!(EncodedItem::parse("A && B_Source_{Store_Store}_Store").is_err());
        assert!(EncodedItem::parse("_Source_{Store_Store}_Store").is_err());
        assert!(EncodedItem::parse("A_Sink_{Store_Store}_Store").is_err());
    }

    #[test]
    fn identical_records() {
        let recs = vec![vec!["a", "b"]; 10];
        let f = apriori(&recs, 0.5, 2).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|s| s.support == Ratio::new(1, 1)));
    }

    #[test]
    fn full_support_keeps_common_items() {
        let recs = vec![vec!["a", "b"], vec!["a", "c"], vec!["a", "b"]];
        let f = apriori(&recs, 1.0, 2).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].items, ["a"]);
    }

    #[test]
    fn empty_corpus_and_bad_threshold() {
        assert!(apriori::<&str>(&[], 0.5, 2).unwrap().is_empty());
        assert!(apriori(&[vec!["a"]], 0.0, 2).is_err());
        assert!(apriori(&[vec!["a"]], 1.5, 2).is_err());
    }

    #[test]
    fn rule_confidences() {
        let pair = |c, a, b| FrequentItemset {
            items: vec![a, b],
            count: c,
            support: Ratio::new(c, 10),
        };
        let single = |c, a: &str| FrequentItemset {
            items: vec![a.to_string()],
            count: c,
            support: Ratio::new(c, 10),
        };
        let f = [single(4, "a"), single(4, "b"), pair(4, "a".into(), "b".into())];
        let rules = derive_rules(&f, 0.5).unwrap();
        assert_eq!(rules.len(), 2);
        assert!(rules.iter().all(|r| r.confidence == Ratio::new(1, 1)));
        let merged = merge_directions(&rules);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].direction, Direction::Both);

        let f = [single(8, "a"), single(2, "b"), pair(2, "a".into(), "b".into())];
        let rules = derive_rules(&f, 0.5).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].lhs, ["b"]);
        assert_eq!(Ratio::new(2, 8), Ratio::new(1, 4));
    }

    #[test]
    fn self_rules_filtered() {
        let rule = |s: &str, d: &str| AssociationRule {
            lhs: vec![format!("{s}_Source_{{Store_Store}}_Store")],
            rhs: vec![format!("{d}_Destination_{{Store_Store}}_Store")],
            support: Ratio::new(1, 2),
            confidence: Ratio::new(1, 1),
        };
        let kept = filter_rules(vec![rule("A", "A"), rule("A", "B"), rule("A&&B", "B&&A")]).unwrap();
        assert_eq!(kept, vec![rule("A", "B")]);
        let bad = AssociationRule {
            lhs: vec!["nonsense".into()],
            ..rule("A", "B")
        };
        assert!(filter_rules(vec![bad]).is_err());
    }

    #[test]
    fn sign_verify_rule() {
        let deps: Vec<_> = (0..5)
            .map(|_| fdep("Sign", "Verify", DepKind::SL))
            .chain([fdep("Base", "Base", DepKind::SS)])
            .collect();
        let rules = mine_rules(&deps, &MineConfig::default()).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(
            rules[0].text(),
            "{Sign_Source_{Store_Load}_Store} ⟺ {Verify_Destination_{Store_Load}_Load}"
        );
        let (s, d) = rules[0].feature_pair().unwrap();
        assert_eq!((s.compact(), d.compact()), ("Sign".into(), "Verify".into()));
    }

    #[test]
    fn report_layout() {
        assert_eq!(report_csv(&[]), format!("{REPORT_HEADER}\n"));
        let r = ReportedRule {
            lhs: "a".into(),
            rhs: "b".into(),
            direction: Direction::Forward,
            support: Ratio::new(1, 3),
            confidence: Ratio::new(2, 3),
        };
        let text = report_csv(&[r.clone(), r]);
        assert_eq!(text, format!("{REPORT_HEADER}\na,b,⟹,0.333333,0.666667\n"));
    }
}
