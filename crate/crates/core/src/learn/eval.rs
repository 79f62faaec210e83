use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    documents, mean_metrics, smote, Hyperparams, Label, LearnError, Metrics, Model, ModelKind, TokenSource,
    TraceDocument, Vocabulary, DEFAULT_SMOTE_K,
};
use crate::modelx::PathRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub test_fraction: f64,
    pub repeats: usize,
    pub folds: usize,
    pub smote_k: usize,
    pub seed: u64,
    pub params: Hyperparams,
    /// When set, every vocabulary is cut down to these tokens.
    pub restrict_tokens: Option<Vec<String>>,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            test_fraction: 0.2,
            repeats: 5,
            folds: 10,
            smote_k: DEFAULT_SMOTE_K,
            seed: 0,
            params: Hyperparams::default(),
            restrict_tokens: None,
        }
    }
}

/// Corpus indices observed by each training stage, for leakage checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalTrace {
    pub vocabulary_rows: BTreeSet<usize>,
    pub sampler_rows: BTreeSet<usize>,
    pub training_rows: BTreeSet<usize>,
    pub test_rows: BTreeSet<usize>,
    pub redrawn_folds: usize,
}

impl EvalTrace {
    pub fn leaks(&self) -> bool {
        [&self.vocabulary_rows, &self.sampler_rows, &self.training_rows]
            .iter()
            .any(|s| !s.is_disjoint(&self.test_rows))
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub vocab: Vocabulary,
    pub model: Model,
    pub train_secs: f64,
}

impl FittedModel {
    pub fn predict_docs(&self, docs: &[TraceDocument]) -> (Vec<Label>, f64) {
        let start = Instant::now();
        let labels = docs.iter().map(|d| self.model.predict(&self.vocab.vector(d))).collect();
        (labels, start.elapsed().as_secs_f64())
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Held-out test metrics of the model refit on the whole training split.
    pub test: Metrics,
    pub cv_mean: Metrics,
    pub cv: Vec<Metrics>,
    pub trace: EvalTrace,
    pub model: FittedModel,
}

/// Mixes a stage tag into the seed so independent stages get unrelated streams.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(17)
}

fn class_indices(labels: &[Label], among: &[usize]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &i in among {
        out[labels[i].is_failure() as usize].push(i);
    }
    out
}

/// Stratified train/test split of `0..labels.len()`. Each class with at
/// least two members keeps at least one on each side.
pub fn stratified_split(labels: &[Label], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut class in class_indices(labels, &all) {
        class.shuffle(&mut rng);
        let n = class.len();
        let mut k = (test_fraction * n as f64).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        } else {
            k = 0;
        }
        test.extend_from_slice(&class[..k]);
        train.extend_from_slice(&class[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// `folds` stratified folds over `among`: each class is shuffled and dealt
/// round-robin.
pub fn stratified_folds(labels: &[Label], among: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for mut class in class_indices(labels, among) {
        class.shuffle(&mut rng);
        for i in class {
            out[next % folds].push(i);
            next += 1;
        }
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

fn has_both(labels: &[Label], idx: &[usize]) -> bool {
    let f = idx.iter().filter(|&&i| labels[i].is_failure()).count();
    f > 0 && f < idx.len()
}

/// Builds the vocabulary on `rows`, rebalances with SMOTE and trains.
pub fn fit(
    docs: &[TraceDocument],
    rows: &[usize],
    source: TokenSource,
    kind: ModelKind,
    plan: &EvalPlan,
    seed: u64,
    trace: Option<&mut EvalTrace>,
) -> Result<FittedModel, LearnError> {
    let start = Instant::now();
    let train_docs: Vec<&TraceDocument> = rows.iter().map(|&i| &docs[i]).collect();
    let mut vocab = Vocabulary::build(train_docs.iter().copied(), source);
    if let Some(keep) = &plan.restrict_tokens {
        vocab = vocab.restrict(keep);
    }
    let x: Vec<Vec<f64>> = train_docs.iter().map(|d| vocab.vector(d)).collect();
    let y: Vec<Label> = train_docs.iter().map(|d| d.label).collect();
    let (xs, ys) = smote(&x, &y, plan.smote_k, derive_seed(seed, 1))?;
    let model = Model::train(kind, &xs, &ys, &plan.params, derive_seed(seed, 2))?;
    if let Some(t) = trace {
        t.vocabulary_rows.extend(rows);
        t.sampler_rows.extend(rows);
        t.training_rows.extend(rows);
    }
    Ok(FittedModel {
        vocab,
        model,
        train_secs: start.elapsed().as_secs_f64(),
    })
}

fn check_labels(docs: &[TraceDocument]) -> Result<Vec<Label>, LearnError> {
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let all: Vec<usize> = (0..labels.len()).collect();
    if !has_both(&labels, &all) {
        return Err(LearnError::SingleClass);
    }
    Ok(labels)
}

/// The split and refit shared by [`evaluate`] and [`partial_data_eval`].
fn final_fit(
    docs: &[TraceDocument],
    labels: &[Label],
    source: TokenSource,
    kind: ModelKind,
    plan: &EvalPlan,
    trace: &mut EvalTrace,
) -> Result<(FittedModel, Vec<usize>, Vec<usize>), LearnError> {
    let (train, test) = stratified_split(labels, plan.test_fraction, derive_seed(plan.seed, 10));
    if !has_both(labels, &train) {
        return Err(LearnError::SingleClass);
    }
    trace.test_rows.extend(&test);
    let fitted = fit(
        docs,
        &train,
        source,
        kind,
        plan,
        derive_seed(plan.seed, 11),
        Some(trace),
    )?;
    Ok((fitted, train, test))
}

/// Cross-validation on the training split, then held-out evaluation of the
/// model refit on the whole training split.
pub fn evaluate(
    plan: &EvalPlan,
    records: &[PathRecord],
    source: TokenSource,
    kind: ModelKind,
) -> Result<EvalReport, LearnError> {
    let docs = documents(records, source)?;
    let labels = check_labels(&docs)?;
    let mut trace = EvalTrace::default();
    let (fitted, train, test) = final_fit(&docs, &labels, source, kind, plan, &mut trace)?;

    let folds = plan.folds.min(train.len()).max(2);
    let mut jobs = Vec::new();
    for r in 0..plan.repeats {
        let mut attempt = 0u64;
        let split = loop {
            let s = stratified_folds(
                &labels,
                &train,
                folds,
                derive_seed(plan.seed, 100 + r as u64 * 1000 + attempt),
            );
            let ok = s.iter().all(|fold| {
                let rest: Vec<usize> = train
                    .iter()
                    .copied()
                    .filter(|i| fold.binary_search(i).is_err())
                    .collect();
                has_both(&labels, &rest)
            });
            if ok {
                break s;
            }
            attempt += 1;
            trace.redrawn_folds += 1;
            log::info!("repeat {r}: fold without both classes, redrawing");
            if attempt > 100 {
                return Err(LearnError::SingleClass);
            }
        };
        for (f, fold) in split.into_iter().enumerate() {
            if !fold.is_empty() {
                jobs.push((r, f, fold));
            }
        }
    }
    let cv_results: Vec<Result<(Metrics, Vec<usize>), LearnError>> = jobs
        .par_iter()
        .map(|(r, f, fold)| {
            let rest: Vec<usize> = train
                .iter()
                .copied()
                .filter(|i| fold.binary_search(i).is_err())
                .collect();
            let m = fit(
                &docs,
                &rest,
                source,
                kind,
                plan,
                derive_seed(plan.seed, 5000 + (*r * 100 + *f) as u64),
                None,
            )?;
            let fold_docs: Vec<TraceDocument> = fold.iter().map(|&i| docs[i].clone()).collect();
            let (pred, secs) = m.predict_docs(&fold_docs);
            let truth: Vec<Label> = fold.iter().map(|&i| labels[i]).collect();
            let mut metrics = Metrics::from_predictions(&truth, &pred);
            metrics.train_secs = m.train_secs;
            metrics.predict_secs = secs;
            Ok((metrics, rest))
        })
        .collect();
    let mut cv = Vec::with_capacity(cv_results.len());
    for r in cv_results {
        let (m, rest) = r?;
        trace.vocabulary_rows.extend(&rest);
        trace.sampler_rows.extend(&rest);
        trace.training_rows.extend(&rest);
        cv.push(m);
    }

    let test_docs: Vec<TraceDocument> = test.iter().map(|&i| docs[i].clone()).collect();
    let (pred, predict_secs) = fitted.predict_docs(&test_docs);
    let truth: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
    let mut metrics = Metrics::from_predictions(&truth, &pred);
    metrics.train_secs = fitted.train_secs;
    metrics.predict_secs = predict_secs;
    debug_assert!(!trace.leaks());
    Ok(EvalReport {
        test: metrics,
        cv_mean: mean_metrics(&cv),
        cv,
        trace,
        model: fitted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionDetection {
    pub spec_id: String,
    pub failure_paths: usize,
    pub detected_paths: usize,
    pub detected: bool,
    /// False when nothing was left to train on after the exclusion.
    pub trained: bool,
}

/// Spec ids in numeric order when they are numbers, text order otherwise.
fn spec_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// For every interaction, trains without its failure paths and checks
/// whether any of them is then classified as failure.
pub fn leave_one_interaction_out(
    plan: &EvalPlan,
    records: &[PathRecord],
    source: TokenSource,
    kind: ModelKind,
    spec_ids: Option<&[String]>,
) -> Result<Vec<InteractionDetection>, LearnError> {
    let docs = documents(records, source)?;
    let mut by_spec: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        if d.label.is_failure() {
            let id = d.spec_id.clone().ok_or(LearnError::MissingSpecId)?;
            by_spec.entry(id).or_default().push(i);
        }
    }
    let mut ids: Vec<String> = match spec_ids {
        Some(ids) => ids.to_vec(),
        None => by_spec.keys().cloned().collect(),
    };
    ids.sort_by(|a, b| spec_order(a, b));
    for id in &ids {
        if !by_spec.contains_key(id) {
            return Err(LearnError::NoFailures(id.clone()));
        }
    }
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    ids.par_iter()
        .enumerate()
        .map(|(n, id)| {
            let held = &by_spec[id];
            let train: Vec<usize> = (0..docs.len()).filter(|i| held.binary_search(i).is_err()).collect();
            if !has_both(&labels, &train) {
                log::warn!("interaction {id}: no failure paths left to train on");
                return Ok(InteractionDetection {
                    spec_id: id.clone(),
                    failure_paths: held.len(),
                    detected_paths: 0,
                    detected: false,
                    trained: false,
                });
            }
            let m = fit(
                &docs,
                &train,
                source,
                kind,
                plan,
                derive_seed(plan.seed, 20_000 + n as u64),
                None,
            )?;
            let held_docs: Vec<TraceDocument> = held.iter().map(|&i| docs[i].clone()).collect();
            let (pred, _) = m.predict_docs(&held_docs);
            let hits = pred.iter().filter(|l| l.is_failure()).count();
            Ok(InteractionDetection {
                spec_id: id.clone(),
                failure_paths: held.len(),
                detected_paths: hits,
                detected: hits > 0,
                trained: true,
            })
        })
        .collect()
}

pub fn detection_rate(rows: &[InteractionDetection]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.detected).count() as f64 / rows.len() as f64
}

/// Removes the leading `fraction` of every call sequence and of the atom list.
pub fn truncate_record(record: &PathRecord, fraction: f64) -> PathRecord {
    let cut = |n: usize| ((fraction * n as f64).floor() as usize).min(n);
    let mut r = record.clone();
    r.call_sequences = r
        .call_sequences
        .iter()
        .map(|s| s[cut(s.len())..].to_vec())
        .filter(|s| !s.is_empty())
        .collect();
    let k = cut(r.atoms.len());
    r.atoms.drain(..k);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialResult {
    pub fraction: f64,
    pub metrics: Metrics,
    pub evaluated: usize,
    pub dropped: usize,
}

/// Scores the refit model of [`evaluate`] on test documents with the head
/// of each sequence and of the atom list removed.
pub fn partial_data_eval(
    plan: &EvalPlan,
    records: &[PathRecord],
    fractions: &[f64],
    source: TokenSource,
    kind: ModelKind,
) -> Result<Vec<PartialResult>, LearnError> {
    let docs = documents(records, source)?;
    let labels = check_labels(&docs)?;
    let mut trace = EvalTrace::default();
    let (fitted, _, test) = final_fit(&docs, &labels, source, kind, plan, &mut trace)?;
    let mut out = Vec::new();
    for &fraction in fractions {
        let mut kept = Vec::new();
        let mut dropped = 0;
        for &i in &test {
            let doc = super::document(&truncate_record(&records[i], fraction), source);
            if doc.tokens.is_empty() {
                dropped += 1;
            } else {
                kept.push(doc);
            }
        }
        if kept.is_empty() {
            return Err(LearnError::AllDropped(fraction));
        }
        let (pred, secs) = fitted.predict_docs(&kept);
        let truth: Vec<Label> = kept.iter().map(|d| d.label).collect();
        let mut metrics = Metrics::from_predictions(&truth, &pred);
        metrics.train_secs = fitted.train_secs;
        metrics.predict_secs = secs;
        out.push(PartialResult {
            fraction,
            metrics,
            evaluated: kept.len(),
            dropped,
        });
    }
    Ok(out)
}

/// Normalized Gini importance per token, highest first, ties by token.
pub fn feature_importance(fitted: &FittedModel) -> Result<Vec<(String, f64)>, LearnError> {
    let Model::Rf(rf) = &fitted.model else {
        return Err(LearnError::NotAForest(fitted.model.kind()));
    };
    let mut out: Vec<(String, f64)> = fitted.vocab.tokens.iter().cloned().zip(rf.importances()).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
