//! Supervised detection of failing paths: bag-of-words documents from call
//! sequences and path conditions, SMOTE rebalancing, three classifiers and
//! the evaluation harness.

mod eval;
mod metrics;
mod models;
mod smote;
mod vectorize;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modelx::{write_atomic, ModelxError};

pub use eval::{
    detection_rate, evaluate, feature_importance, fit, leave_one_interaction_out, partial_data_eval, stratified_folds,
    stratified_split, truncate_record, EvalPlan, EvalReport, EvalTrace, FittedModel, InteractionDetection,
    PartialResult,
};
pub use metrics::{mean_metrics, Metrics};
pub use models::{Hyperparams, LinearSvm, Model, ModelKind, NaiveBayes, RandomForest, Tree, TreeNode};
pub use smote::{interpolate, smote, DEFAULT_SMOTE_K};
pub use vectorize::{
    document, documents, strip_instance_suffixes, vectorize, Label, TokenSource, TraceDocument, Vocabulary,
};

pub const METRICS_HEADER: &str = "dataset,source,model,bac,recall,precision,train_secs,predict_secs";
pub const IMPORTANCE_HEADER: &str = "token,score";
pub const MODEL_FORMAT: &str = "featint-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("source `{0}` needs atomic constraints but no record has any")]
    MissingAtoms(TokenSource),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("failure record without a spec id")]
    MissingSpecId,
    #[error("interaction `{0}` has no failure records")]
    NoFailures(String),
    #[error("truncating {0} of every document leaves nothing to classify")]
    AllDropped(f64),
    #[error("feature importance needs a random forest, got {0}")]
    NotAForest(ModelKind),
    #[error("model was trained on `{model}` tokens but `{requested}` was requested")]
    SourceMismatch { model: TokenSource, requested: TokenSource },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] ModelxError),
}

/// Self-describing serialized model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub source: TokenSource,
    pub vocabulary: Vec<String>,
    pub model: Model,
}

impl ModelFile {
    pub fn new(fitted: &FittedModel) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            source: fitted.vocab.source,
            vocabulary: fitted.vocab.tokens.clone(),
            model: fitted.model.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<ModelFile, LearnError> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::ModelFile(e.to_string()))?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(LearnError::ModelFile(format!(
                "unsupported format {} v{}",
                f.format, f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        Ok(write_atomic(path, self.to_json().as_bytes())?)
    }

    pub fn load(path: &Path) -> Result<ModelFile, LearnError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelxError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ModelFile::from_json(&text)
    }

    pub fn fitted(&self) -> FittedModel {
        FittedModel {
            vocab: Vocabulary::from_tokens(self.source, self.vocabulary.clone()),
            model: self.model.clone(),
            train_secs: 0.0,
        }
    }

    pub fn check_source(&self, requested: TokenSource) -> Result<(), LearnError> {
        if self.source != requested {
            return Err(LearnError::SourceMismatch {
                model: self.source,
                requested,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trip() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let y = vec![Label::Failure, Label::Normal];
        let fitted = FittedModel {
            vocab: Vocabulary::from_tokens(TokenSource::Stack, vec!["b".into(), "a".into()]),
            model: Model::train(ModelKind::Nb, &x, &y, &Hyperparams::default(), 0).unwrap(),
            train_secs: 0.0,
        };
        let text = ModelFile::new(&fitted).to_json();
        let back = ModelFile::from_json(&text).unwrap();
        assert_eq!(back.vocabulary, ["a", "b"]);
        assert_eq!(back.model, fitted.model);
        assert!(back.check_source(TokenSource::Constraints).is_err());
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(ModelFile::from_json(&bumped).is_err());
    }
}
