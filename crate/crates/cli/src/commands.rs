//! Subcommand implementations. Each returns the files it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use featint_core::featloc::{self, classify_relevance, locate_all, FeatlocError};
use featint_core::flc::{parse_products, FlcError};
use featint_core::learn::{
    detection_rate, document, evaluate, feature_importance, leave_one_interaction_out, partial_data_eval, LearnError,
    Metrics, ModelFile, ModelKind, IMPORTANCE_HEADER, METRICS_HEADER,
};
use featint_core::mine::{self, encode, itemsets_to_jsonl, mine_rules, MineError};
use featint_core::modelx::{
    emit_deps, emit_paths, read_deps, read_paths, write_atomic, ExclusionList, ModelxError, PathRecord,
};
use featint_core::symex::DepKind;

use crate::bench::{self, BenchmarkSuite};
use crate::config::{ConfigError, RunConfig};
use crate::pipeline::{extract_products, validate_suite, ExtractOutput, PipelineError, SUMMARY_HEADER};

/// Truncation ratios reported by `ablate`.
pub const PARTIAL_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];
pub const TOP_TOKENS: usize = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match &e {
            ConfigError::UnknownKey { origin, .. } | ConfigError::BadValue { origin, .. } if origin == "flag" => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_error!(ModelxError, FlcError, FeatlocError, MineError, LearnError);

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Suite { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// Some product hit the timeout or path budget.
    pub truncated: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.truncated {
            3
        } else {
            0
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

struct Writer<'a> {
    dir: &'a Path,
    config: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path, config: &'a RunConfig) -> Result<Self, CliError> {
        ensure_dir(dir)?;
        Ok(Writer {
            dir,
            config,
            written: Vec::new(),
        })
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// CSV report with the version and configuration preamble.
    fn report(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = self.config.preamble() + body;
        self.raw(name, text.as_bytes())
    }

    fn done(self, truncated: bool) -> Outcome {
        Outcome {
            written: self.written,
            truncated,
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into())
}

fn secs(config: &RunConfig, v: f64) -> f64 {
    if config.timings {
        v
    } else {
        0.0
    }
}

fn metrics_row(config: &RunConfig, dataset: &str, kind: ModelKind, m: &Metrics) -> String {
    format!(
        "{dataset},{},{kind},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        config.source,
        m.bac,
        m.recall,
        m.precision,
        secs(config, m.train_secs),
        secs(config, m.predict_secs)
    )
}

fn summary_csv(out: &ExtractOutput) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for p in &out.summary {
        s.push_str(&p.csv_row());
        s.push('\n');
    }
    s
}

/// `extract`: source unit + product file -> path and dependency corpora.
pub fn extract(config: &RunConfig, src: &Path, products: &Path, out: &Path) -> Result<Outcome, CliError> {
    let source = read_text(src)?;
    let defs = parse_products(&read_text(products)?)?;
    if defs.is_empty() {
        return Err(CliError::Input(format!("{}: no products", products.display())));
    }
    let result = extract_products(
        &source,
        &src.display().to_string(),
        &defs,
        &config.engine(),
        &ExclusionList::default(),
    )?;
    let emitted: usize = result.summary.iter().map(|s| s.normal + s.failure).sum();
    if emitted != result.paths.len() + result.dropped {
        return Err(CliError::Internal(format!(
            "{emitted} terminated paths but {} records",
            result.paths.len() + result.dropped
        )));
    }
    for s in &result.summary {
        println!(
            "{}: {} paths ({} normal, {} failure, {} bound-exhausted), {} SS, {} SL{}",
            s.product,
            s.paths,
            s.normal,
            s.failure,
            s.bound_exhausted,
            s.ss,
            s.sl,
            if s.truncated { ", truncated" } else { "" }
        );
    }
    let mut w = Writer::new(out, config)?;
    let paths = out.join("paths.jsonl");
    emit_paths(&result.paths, &paths)?;
    w.written.push(paths);
    let deps = out.join("deps.jsonl");
    emit_deps(&result.deps, &deps)?;
    w.written.push(deps);
    w.report("extract_summary.csv", &summary_csv(&result))?;
    Ok(w.done(result.any_truncated()))
}

/// `mine`: dependency corpus -> feature dependencies, itemsets and rules.
pub fn mine(config: &RunConfig, deps_path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let deps = read_deps(deps_path)?;
    if deps.is_empty() {
        log::warn!("{}: empty dependency corpus", deps_path.display());
    }
    let located = locate_all(&deps, config.locate, &config.role_separator)?;
    let rules = mine_rules(&located, &config.mining())?;
    let tally = classify_relevance(&deps, config.locate, &config.role_separator)?;
    let mut w = Writer::new(out, config)?;
    w.report("feature_deps.csv", &featloc::to_csv(&located))?;
    let items: Vec<_> = located.iter().map(encode).collect();
    w.raw("itemsets.jsonl", itemsets_to_jsonl(&items).as_bytes())?;
    w.report("rules.csv", &mine::report_csv(&rules))?;
    let mut rel = String::from("kind,fr_fr,fr_nfr,nfr_fr,nfr_nfr\n");
    for kind in [DepKind::SL, DepKind::SS] {
        let b = tally.of(kind);
        let _ = writeln!(rel, "{kind},{},{},{},{}", b.fr_fr, b.fr_nfr, b.nfr_fr, b.nfr_nfr);
    }
    w.report("relevance.csv", &rel)?;
    println!("{} feature dependencies, {} rules", located.len(), rules.len());
    for r in &rules {
        println!("{} (support {}, confidence {})", r.text(), r.support, r.confidence);
    }
    Ok(w.done(false))
}

fn failure_records(records: &[PathRecord]) -> usize {
    records.iter().filter(|r| r.is_failure()).count()
}

/// `train`: path corpus -> metrics and a saved model.
pub fn train(config: &RunConfig, paths: &Path, out: &Path) -> Result<Outcome, CliError> {
    let records = read_paths(paths)?;
    log::info!("{} records, {} failures", records.len(), failure_records(&records));
    let report = evaluate(&config.plan(), &records, config.source, config.model)?;
    let dataset = stem(paths);
    let mut w = Writer::new(out, config)?;
    let mut body = format!("{METRICS_HEADER}\n");
    body += &metrics_row(config, &format!("{dataset}:test"), config.model, &report.test);
    body += &metrics_row(config, &format!("{dataset}:cv"), config.model, &report.cv_mean);
    w.report("metrics.csv", &body)?;
    let mut folds = String::from("fold,tp,fn,tn,fp,bac\n");
    for (k, m) in report.cv.iter().enumerate() {
        let _ = writeln!(folds, "{k},{},{},{},{},{:.6}", m.tp, m.fn_, m.tn, m.fp, m.bac);
    }
    w.report("cv_folds.csv", &folds)?;
    w.raw("model.json", ModelFile::new(&report.model).to_json().as_bytes())?;
    println!(
        "{} {}: test BAC {:.3}, recall {:.3}, precision {:.3}; CV BAC {:.3}",
        config.model, config.source, report.test.bac, report.test.recall, report.test.precision, report.cv_mean.bac
    );
    Ok(w.done(false))
}

fn sequence_text(record: &PathRecord) -> String {
    record
        .call_sequences
        .iter()
        .map(|s| s.iter().map(|f| f.0.as_str()).collect::<Vec<_>>().join(">"))
        .collect::<Vec<_>>()
        .join(" | ")
}

/// `predict`: saved model + path corpus -> per-path labels.
pub fn predict(config: &RunConfig, model: &Path, paths: &Path, out: &Path) -> Result<Outcome, CliError> {
    let file = ModelFile::load(model)?;
    if config.is_explicit("source") {
        file.check_source(config.source)?;
    }
    let records = read_paths(paths)?;
    let docs: Vec<_> = records.iter().map(|r| document(r, file.source)).collect();
    if file.source != featint_core::learn::TokenSource::Stack && records.iter().all(|r| r.atoms.is_empty()) {
        return Err(LearnError::MissingAtoms(file.source).into());
    }
    let (labels, _) = file.fitted().predict_docs(&docs);
    let mut body = String::from("product,index,status,spec_id,predicted,call_sequences\n");
    let mut flagged = 0;
    for (k, (r, l)) in records.iter().zip(&labels).enumerate() {
        let status = if r.is_failure() { "failure" } else { "normal" };
        let predicted = if l.is_failure() { "failure" } else { "normal" };
        let _ = writeln!(
            body,
            "{},{k},{status},{},{predicted},{}",
            r.product,
            r.spec_id.as_deref().unwrap_or(""),
            sequence_text(r)
        );
        if l.is_failure() {
            flagged += 1;
            println!("{} #{k}: predicted failure: {}", r.product, sequence_text(r));
        }
    }
    println!("{flagged} of {} paths flagged", records.len());
    let mut w = Writer::new(out, config)?;
    w.report("predictions.csv", &body)?;
    Ok(w.done(false))
}

/// Ids of guarded interactions present in a corpus.
fn spec_ids(records: &[PathRecord]) -> Vec<String> {
    let mut ids: Vec<String> = records.iter().filter_map(|r| r.spec_id.clone()).collect();
    ids.sort_by(|a, b| (a.parse::<u64>().ok(), a).cmp(&(b.parse::<u64>().ok(), b)));
    ids.dedup();
    ids
}

/// `ablate`: leave-one-interaction-out, partial data, importance and the
/// top-token retrain.
pub fn ablate(config: &RunConfig, paths: &Path, out: &Path) -> Result<Outcome, CliError> {
    let records = read_paths(paths)?;
    let plan = config.plan();
    let dataset = stem(paths);
    let mut w = Writer::new(out, config)?;

    let rows = leave_one_interaction_out(&plan, &records, config.source, config.model, None)?;
    let mut body = String::from("spec_id,failure_paths,detected_paths,detected,trained\n");
    for r in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            r.spec_id, r.failure_paths, r.detected_paths, r.detected, r.trained
        );
    }
    w.report("loio.csv", &body)?;
    println!(
        "leave-one-interaction-out: {:.0}% of {} interactions detected",
        100.0 * detection_rate(&rows),
        spec_ids(&records).len()
    );

    let partial = partial_data_eval(&plan, &records, &PARTIAL_FRACTIONS, config.source, config.model)?;
    let mut body = String::from("fraction,evaluated,dropped,bac,recall,precision\n");
    for p in &partial {
        let _ = writeln!(
            body,
            "{:.2},{},{},{:.6},{:.6},{:.6}",
            p.fraction, p.evaluated, p.dropped, p.metrics.bac, p.metrics.recall, p.metrics.precision
        );
    }
    w.report("partial.csv", &body)?;

    let forest = evaluate(&plan, &records, config.source, ModelKind::Rf)?;
    let ranked = feature_importance(&forest.model)?;
    let mut body = format!("{IMPORTANCE_HEADER}\n");
    for (t, s) in &ranked {
        let _ = writeln!(body, "{t},{s:.6}");
    }
    w.report("importance.csv", &body)?;

    let top: Vec<String> = ranked.iter().take(TOP_TOKENS).map(|(t, _)| t.clone()).collect();
    let mut narrowed = plan.clone();
    narrowed.restrict_tokens = Some(top.clone());
    let mut body = format!("{METRICS_HEADER}\n");
    for kind in ModelKind::ALL {
        let r = evaluate(&narrowed, &records, config.source, kind)?;
        body += &metrics_row(config, &format!("{dataset}:top{TOP_TOKENS}"), kind, &r.test);
    }
    w.report("retrain.csv", &body)?;
    println!("top tokens: {}", top.join(", "));
    Ok(w.done(false))
}

/// `gen-bench`: writes the generated suites after checking each with the
/// symbolic engine.
pub fn gen_bench(config: &RunConfig, out: &Path, suites: &[String]) -> Result<Outcome, CliError> {
    let names: Vec<String> = if suites.is_empty() {
        bench::SUITE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        suites.to_vec()
    };
    let mut written = Vec::new();
    for name in &names {
        let suite =
            bench::by_name(name, config.seed).ok_or_else(|| CliError::Usage(format!("unknown suite `{name}`")))?;
        check_suite(config, &suite)?;
        let dir = out.join(&suite.name);
        let mut w = Writer::new(&dir, config)?;
        w.raw(&suite.file_name, suite.source.as_bytes())?;
        w.raw("products.txt", suite.products_text().as_bytes())?;
        w.raw("interactions.csv", suite.interactions_csv().as_bytes())?;
        println!(
            "{}: {} features, {} products, {} interactions, {} lines",
            suite.name,
            suite.features.len(),
            suite.products.len(),
            suite.interactions.len(),
            suite.line_count()
        );
        written.extend(w.written);
    }
    Ok(Outcome {
        written,
        truncated: false,
    })
}

fn check_suite(config: &RunConfig, suite: &BenchmarkSuite) -> Result<(), CliError> {
    // The scale unit is a throughput target, not a validated corpus.
    if suite.name == "scale" {
        return Ok(());
    }
    let out = crate::pipeline::extract_suite(suite, &config.engine())?;
    validate_suite(suite, &out)?;
    Ok(())
}

const REPORT_PARTS: [(&str, &str); 9] = [
    ("extract_summary.csv", "Extraction"),
    ("relevance.csv", "Dependency relevance"),
    ("rules.csv", "Mined rules"),
    ("metrics.csv", "Classifier metrics"),
    ("loio.csv", "Leave-one-interaction-out"),
    ("partial.csv", "Partial data"),
    ("importance.csv", "Token importance"),
    ("retrain.csv", "Top-token retrain"),
    ("predictions.csv", "Predictions"),
];

/// Rows of a report CSV without its comment preamble.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn markdown_table(rows: &[Vec<String>], limit: usize) -> String {
    let mut s = String::new();
    let Some((head, body)) = rows.split_first() else {
        return s;
    };
    let _ = writeln!(s, "| {} |", head.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(head.len()));
    for r in body.iter().take(limit) {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    if body.len() > limit {
        let _ = writeln!(s, "\n{} more rows omitted.", body.len() - limit);
    }
    s
}

/// `report`: gathers the CSV outputs found in `dirs` into one markdown file.
pub fn report(config: &RunConfig, dirs: &[PathBuf], out: &Path) -> Result<Outcome, CliError> {
    let mut md = format!("# featint report\n\nfeatint {}\n\n", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(md, "Configuration: `{}`\n", config.to_json());
    let mut found = 0;
    for dir in dirs {
        for (file, title) in REPORT_PARTS {
            let path = dir.join(file);
            if !path.is_file() {
                continue;
            }
            found += 1;
            let rows = csv_rows(&read_text(&path)?);
            let _ = writeln!(md, "## {title} ({})\n", path.display());
            md += &markdown_table(&rows, 50);
            md.push('\n');
        }
    }
    if found == 0 {
        return Err(CliError::Input("no report inputs found".into()));
    }
    let mut w = Writer::new(out, config)?;
    w.raw("report.md", md.as_bytes())?;
    Ok(w.done(false))
}
