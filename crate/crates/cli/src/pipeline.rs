//! Source unit + products -> cleaned path and dependency corpora.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use featint_core::flc::{parse_unit, resolve_product, FlcError, LowerOptions, ProductDef};
use featint_core::modelx::{annotate_metadata_vars, clean_records, DepRecord, ExclusionList, PathRecord};
use featint_core::symex::{extract_feature_models, EngineConfig, PathStatus, SymexError};

use crate::bench::BenchmarkSuite;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{file}: {source}")]
    Frontend { file: String, source: FlcError },
    #[error("product `{product}`: {source}")]
    Product { product: String, source: FlcError },
    #[error("product `{product}`: {source}")]
    Engine { product: String, source: SymexError },
    #[error("no products to analyse")]
    NoProducts,
    #[error("suite `{suite}`: {message}")]
    Suite { suite: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductSummary {
    pub product: String,
    pub paths: usize,
    pub normal: usize,
    pub failure: usize,
    pub bound_exhausted: usize,
    pub ss: usize,
    pub sl: usize,
    pub truncated: bool,
    /// Failure paths per spec id.
    pub failures_by_spec: BTreeMap<String, usize>,
}

pub const SUMMARY_HEADER: &str = "product,paths,normal,failure,bound_exhausted,ss,sl,truncated";

impl ProductSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.product, self.paths, self.normal, self.failure, self.bound_exhausted, self.ss, self.sl, self.truncated
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOutput {
    pub paths: Vec<PathRecord>,
    pub deps: Vec<DepRecord>,
    pub summary: Vec<ProductSummary>,
    /// Records dropped because cleaning left no call sequence.
    pub dropped: usize,
}

impl ExtractOutput {
    pub fn any_truncated(&self) -> bool {
        self.summary.iter().any(|s| s.truncated)
    }
}

struct ProductRun {
    paths: Vec<PathRecord>,
    deps: Vec<DepRecord>,
    summary: ProductSummary,
    dropped: usize,
}

fn run_product(
    unit: &featint_core::flc::SourceUnit,
    product: &ProductDef,
    config: &EngineConfig,
    exclusions: &ExclusionList,
) -> Result<ProductRun, PipelineError> {
    let perr = |source| PipelineError::Product {
        product: product.name.clone(),
        source,
    };
    product.validate(unit).map_err(perr)?;
    let program = resolve_product(
        unit,
        product,
        &LowerOptions {
            loop_bound: config.loop_bound,
        },
    )
    .map_err(perr)?;
    let result = extract_feature_models(&program, config).map_err(|source| PipelineError::Engine {
        product: product.name.clone(),
        source,
    })?;
    let count = |s| result.with_status(s).count();
    let mut failures_by_spec = BTreeMap::new();
    for p in result.fail_paths() {
        let id = p.spec_id.clone().unwrap_or_else(|| "-".into());
        *failures_by_spec.entry(id).or_insert(0) += 1;
    }
    let summary = ProductSummary {
        product: product.name.clone(),
        paths: result.paths.len(),
        normal: count(PathStatus::Normal),
        failure: count(PathStatus::Failure),
        bound_exhausted: count(PathStatus::BoundExhausted),
        ss: result.ss.len(),
        sl: result.sl.len(),
        truncated: result.truncated,
        failures_by_spec,
    };
    let raw: Vec<PathRecord> = result
        .paths
        .iter()
        .filter_map(|p| PathRecord::from_outcome(&product.name, p))
        .collect();
    let (paths, stats) = clean_records(raw, exclusions);
    let deps = result
        .ss
        .iter()
        .chain(&result.sl)
        .map(|p| DepRecord::from_pair(&product.name, p))
        .collect();
    Ok(ProductRun {
        paths,
        deps,
        summary,
        dropped: stats.dropped,
    })
}

/// Runs annotate, resolve, extract and clean for every product. Products
/// are analysed in parallel; outputs keep the product order.
pub fn extract_products(
    source: &str,
    file: &str,
    products: &[ProductDef],
    config: &EngineConfig,
    exclusions: &ExclusionList,
) -> Result<ExtractOutput, PipelineError> {
    if products.is_empty() {
        return Err(PipelineError::NoProducts);
    }
    let ferr = |source| PipelineError::Frontend {
        file: file.to_string(),
        source,
    };
    let unit = parse_unit(source, file).map_err(ferr)?;
    let unit = annotate_metadata_vars(&unit).map_err(ferr)?;
    let runs: Vec<Result<ProductRun, PipelineError>> = products
        .par_iter()
        .map(|p| run_product(&unit, p, config, exclusions))
        .collect();
    let mut out = ExtractOutput::default();
    for run in runs {
        let run = run?;
        log::info!(
            "{}: {} paths, {} deps{}",
            run.summary.product,
            run.summary.paths,
            run.summary.ss + run.summary.sl,
            if run.summary.truncated { " (truncated)" } else { "" }
        );
        out.paths.extend(run.paths);
        out.deps.extend(run.deps);
        out.summary.push(run.summary);
        out.dropped += run.dropped;
    }
    Ok(out)
}

pub fn extract_suite(suite: &BenchmarkSuite, config: &EngineConfig) -> Result<ExtractOutput, PipelineError> {
    extract_products(
        &suite.source,
        &suite.file_name,
        &suite.products,
        config,
        &ExclusionList::default(),
    )
}

/// Checks that every guarded interaction fails in at least one product and
/// that failures only ever carry the ids of interactions whose features are
/// both enabled.
pub fn validate_suite(suite: &BenchmarkSuite, out: &ExtractOutput) -> Result<(), PipelineError> {
    let err = |message: String| PipelineError::Suite {
        suite: suite.name.clone(),
        message,
    };
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (summary, product) in out.summary.iter().zip(&suite.products) {
        for id in summary.failures_by_spec.keys() {
            let inter = suite
                .interaction(id)
                .ok_or_else(|| err(format!("unexpected failure id `{id}` in {}", product.name)))?;
            let (a, b) = &inter.features;
            if !product.enabled.contains(a) || !product.enabled.contains(b) {
                return Err(err(format!(
                    "interaction {id} fails in {} without both features",
                    product.name
                )));
            }
            seen.insert(id.as_str());
        }
    }
    for i in suite.interactions.iter().filter(|i| i.guarded) {
        if !seen.contains(i.spec_id.as_str()) {
            return Err(err(format!("interaction {} never fails", i.spec_id)));
        }
    }
    Ok(())
}
