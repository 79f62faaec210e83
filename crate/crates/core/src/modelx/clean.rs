use crate::symex::CallSequence;

use super::PathRecord;

/// Function names stripped from call sequences before learning: spec
/// checkers and the failure intrinsic wrapper.
pub const DEFAULT_EXCLUSIONS: &[&str] = &["*_spec__*", "__automaton_fail"];

/// Set of function-name patterns; `*` matches any run of characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionList {
    patterns: Vec<String>,
}

impl Default for ExclusionList {
    fn default() -> Self {
        ExclusionList::new(DEFAULT_EXCLUSIONS.iter().copied())
    }
}

impl ExclusionList {
    pub fn new<I, S>(patterns: I) -> ExclusionList
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ExclusionList {
            patterns: patterns.into_iter().map(Into::into).collect(),
        }
    }

    pub fn empty() -> ExclusionList {
        ExclusionList { patterns: Vec::new() }
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn matches(&self, name: &str) -> bool {
        self.patterns.iter().any(|p| glob_match(p, name))
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || !text[first.len()..].ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

/// Removes excluded functions from `seq`; `None` if nothing would remain.
pub fn clean_trace(seq: &CallSequence, exclusions: &ExclusionList) -> Option<CallSequence> {
    let entries: Vec<_> = seq
        .entries
        .iter()
        .filter(|e| !exclusions.matches(&e.function))
        .cloned()
        .collect();
    (!entries.is_empty()).then_some(CallSequence { entries })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanStats {
    pub kept: usize,
    pub dropped: usize,
}

/// Cleans every sequence of every record. Sequences emptied by cleaning
/// are removed, duplicates created by cleaning are merged, and records left
/// without any sequence are dropped and counted.
pub fn clean_records(records: Vec<PathRecord>, exclusions: &ExclusionList) -> (Vec<PathRecord>, CleanStats) {
    let mut stats = CleanStats::default();
    let mut out = Vec::with_capacity(records.len());
    for mut r in records {
        let mut seqs: Vec<Vec<super::CallFrame>> = Vec::new();
        for s in &r.call_sequences {
            let cleaned: Vec<super::CallFrame> = s.iter().filter(|f| !exclusions.matches(&f.0)).cloned().collect();
            if !cleaned.is_empty() && !seqs.contains(&cleaned) {
                seqs.push(cleaned);
            }
        }
        if seqs.is_empty() {
            stats.dropped += 1;
            continue;
        }
        r.call_sequences = seqs;
        stats.kept += 1;
        out.push(r);
    }
    (out, stats)
}
