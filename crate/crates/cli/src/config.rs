//! Run configuration: defaults, `key = value` files and flag overrides.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use featint_core::featloc::{LocateMode, DEFAULT_ROLE_SEPARATOR};
use featint_core::learn::{EvalPlan, Hyperparams, ModelKind, TokenSource, DEFAULT_SMOTE_K};
use featint_core::mine::{MineConfig, DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SUPPORT};
use featint_core::symex::{EngineConfig, SearchOrder, StoreKeyMode};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: bad value `{value}` for `{key}`: {message}")]
    BadValue {
        origin: String,
        key: String,
        value: String,
        message: String,
    },
    #[error("{origin}: line {line} is not `key = value`")]
    Syntax { origin: String, line: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Everything that influences a command's output. Serialized into the
/// preamble of every report so that a run can be reproduced from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub seed: u64,
    pub timeout_secs: f64,
    pub max_paths: usize,
    #[serde(rename = "L")]
    pub longest: usize,
    pub loop_bound: i64,
    pub search: SearchOrder,
    pub store_key_mode: StoreKeyMode,
    pub feasibility_budget: u64,
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_itemset: usize,
    pub locate: LocateMode,
    pub role_separator: String,
    pub source: TokenSource,
    pub model: ModelKind,
    pub test_fraction: f64,
    pub repeats: usize,
    pub folds: usize,
    pub smote_k: usize,
    pub nb_alpha: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_samples_split: usize,
    /// Record wall-clock timings in reports; off keeps outputs reproducible.
    pub timings: bool,
    /// Command inputs as given on the command line.
    pub inputs: Vec<String>,
    /// Keys set by a file or flag rather than defaulted.
    #[serde(skip)]
    pub explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let engine = EngineConfig::default();
        let params = Hyperparams::default();
        RunConfig {
            seed: 0,
            timeout_secs: engine.timeout_secs,
            max_paths: engine.max_paths,
            longest: engine.longest,
            loop_bound: engine.loop_bound,
            search: engine.search,
            store_key_mode: engine.store_key_mode,
            feasibility_budget: engine.feasibility_budget,
            min_support: DEFAULT_MIN_SUPPORT,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            max_itemset: 2,
            locate: LocateMode::Name,
            role_separator: DEFAULT_ROLE_SEPARATOR.into(),
            source: TokenSource::Combined,
            model: ModelKind::Svm,
            test_fraction: 0.2,
            repeats: 5,
            folds: 10,
            smote_k: DEFAULT_SMOTE_K,
            nb_alpha: params.nb_alpha,
            svm_lambda: params.svm_lambda,
            svm_epochs: params.svm_epochs,
            rf_trees: params.rf_trees,
            rf_max_depth: params.rf_max_depth,
            rf_min_samples_split: params.rf_min_samples_split,
            timings: false,
            inputs: Vec::new(),
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(origin: &str, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        origin: origin.into(),
        key: key.into(),
        value: value.into(),
        message: e.to_string(),
    })
}

fn parse_search(s: &str) -> Result<SearchOrder, String> {
    match s {
        "dfs" => Ok(SearchOrder::Dfs),
        "bfs" => Ok(SearchOrder::Bfs),
        _ => Err("expected dfs or bfs".into()),
    }
}

impl RunConfig {
    /// Sets one key; keys are the long flag names.
    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(origin, key, v)?,
            "timeout-secs" => self.timeout_secs = parse(origin, key, v)?,
            "max-paths" => self.max_paths = parse(origin, key, v)?,
            "L" | "longest" => self.longest = parse(origin, key, v)?,
            "loop-bound" => self.loop_bound = parse(origin, key, v)?,
            "search" => {
                self.search = parse_search(v).map_err(|message| ConfigError::BadValue {
                    origin: origin.into(),
                    key: key.into(),
                    value: v.into(),
                    message,
                })?
            }
            "store-key-mode" => self.store_key_mode = parse(origin, key, v)?,
            "feasibility-budget" => self.feasibility_budget = parse(origin, key, v)?,
            "min-support" => self.min_support = parse(origin, key, v)?,
            "min-confidence" => self.min_confidence = parse(origin, key, v)?,
            "max-itemset" => self.max_itemset = parse(origin, key, v)?,
            "locate" => self.locate = parse(origin, key, v)?,
            "role-separator" => self.role_separator = v.to_string(),
            "source" => self.source = parse(origin, key, v)?,
            "model" => self.model = parse(origin, key, v)?,
            "test-fraction" => self.test_fraction = parse(origin, key, v)?,
            "repeats" => self.repeats = parse(origin, key, v)?,
            "folds" => self.folds = parse(origin, key, v)?,
            "smote-k" => self.smote_k = parse(origin, key, v)?,
            "nb-alpha" => self.nb_alpha = parse(origin, key, v)?,
            "svm-lambda" => self.svm_lambda = parse(origin, key, v)?,
            "svm-epochs" => self.svm_epochs = parse(origin, key, v)?,
            "rf-trees" => self.rf_trees = parse(origin, key, v)?,
            "rf-max-depth" => self.rf_max_depth = parse(origin, key, v)?,
            "rf-min-samples-split" => self.rf_min_samples_split = parse(origin, key, v)?,
            "timings" => self.timings = parse(origin, key, v)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.into(),
                    key: key.into(),
                })
            }
        }
        self.explicit
            .insert(if key == "longest" { "L".into() } else { key.to_string() });
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment line.
    pub fn apply_text(&mut self, origin: &str, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax {
                origin: origin.into(),
                line: idx + 1,
            })?;
            self.set(origin, k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.apply_text(&path.display().to_string(), &text)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            timeout_secs: self.timeout_secs,
            max_paths: self.max_paths,
            longest: self.longest,
            loop_bound: self.loop_bound,
            search: self.search,
            store_key_mode: self.store_key_mode,
            feasibility_budget: self.feasibility_budget,
            seed: self.seed,
        }
    }

    pub fn mining(&self) -> MineConfig {
        MineConfig {
            min_support: self.min_support,
            min_confidence: self.min_confidence,
            max_size: self.max_itemset,
        }
    }

    pub fn plan(&self) -> EvalPlan {
        EvalPlan {
            test_fraction: self.test_fraction,
            repeats: self.repeats,
            folds: self.folds,
            smote_k: self.smote_k,
            seed: self.seed,
            params: Hyperparams {
                nb_alpha: self.nb_alpha,
                svm_lambda: self.svm_lambda,
                svm_epochs: self.svm_epochs,
                rf_trees: self.rf_trees,
                rf_max_depth: self.rf_max_depth,
                rf_min_samples_split: self.rf_min_samples_split,
            },
            restrict_tokens: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Comment lines that open every CSV report.
    pub fn preamble(&self) -> String {
        format!(
            "# featint {}\n# config: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.to_json()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flag_precedence() {
        let mut c = RunConfig::default();
        c.apply_text("cfg", "# tuned\nseed = 4\nmin-support=0.2\n\nL = 3\n")
            .unwrap();
        c.set("flag", "seed", "9").unwrap();
        assert_eq!((c.seed, c.min_support, c.longest), (9, 0.2, 3));
        assert_eq!(c.engine().seed, 9);
        assert_eq!(c.plan().seed, 9);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut c = RunConfig::default();
        assert!(matches!(
            c.apply_text("cfg", "colour = red"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            c.apply_text("cfg", "seed 4"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            c.set("flag", "model", "knn"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            c.set("flag", "store-key-mode", "x"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn preamble_carries_config() {
        let c = RunConfig::default();
        let p = c.preamble();
        let mut lines = p.lines();
        assert!(lines.next().unwrap().starts_with("# featint "));
        let json = lines.next().unwrap().strip_prefix("# config: ").unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["L"], 10);
        assert_eq!(v["store-key-mode"], "base-address");
        assert_eq!(v["source"], "combined");
    }
}
