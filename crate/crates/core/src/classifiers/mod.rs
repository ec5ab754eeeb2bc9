//! Sentiment models behind one interface, plus the versioned model artifact.
//!
//! Artifact layout: a single header line `SENTIBUCKET-MODEL v1 <kind>`
//! followed by the model as JSON.

pub mod forest;
pub mod lexicon_scorer;
pub mod naive_bayes;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedCorpus;
use crate::features::{VocabConfig, Vocabulary};
use crate::label::{SentimentLabel, NUM_CLASSES};

pub use forest::{train_random_forest, ForestParams, MaxFeatures, RandomForestModel};
pub use lexicon_scorer::{
    afinn_score, lexicon_classify, vader_lexicon_classify, LexiconScorerConfig, ScoringRule,
    Thresholds,
};
pub use naive_bayes::{train_naive_bayes, NaiveBayesModel};

pub const ARTIFACT_MAGIC: &str = "SENTIBUCKET-MODEL";
pub const ARTIFACT_VERSION: &str = "v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set has a single class; at least two are required")]
    SingleClass,
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a model artifact (missing '{ARTIFACT_MAGIC}' header)")]
    BadMagic,
    #[error("unsupported artifact version '{0}', expected '{ARTIFACT_VERSION}'")]
    UnsupportedVersion(String),
    #[error("header declares a '{header}' model but the payload holds '{payload}'")]
    KindMismatch { header: String, payload: String },
    #[error("artifact payload is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("{path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
}

/// A predicted class with the distribution it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: SentimentLabel,
    pub distribution: [f64; NUM_CLASSES],
}

impl Prediction {
    /// Argmax, ties going to the more negative class.
    pub fn from_distribution(distribution: [f64; NUM_CLASSES]) -> Self {
        let mut best = 0;
        for i in 1..NUM_CLASSES {
            if distribution[i] > distribution[best] {
                best = i;
            }
        }
        Self {
            label: SentimentLabel::ALL[best],
            distribution,
        }
    }

    pub fn one_hot(label: SentimentLabel) -> Self {
        let mut distribution = [0.0; NUM_CLASSES];
        distribution[label.index()] = 1.0;
        Self {
            label,
            distribution,
        }
    }
}

/// Anything that can label an utterance.
pub trait SentimentClassifier: Send + Sync {
    fn predict(&self, text: &str) -> Prediction;

    fn classify(&self, text: &str) -> SentimentLabel {
        self.predict(text).label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Forest,
    NaiveBayes,
    Afinn,
    Vader,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::NaiveBayes => "naive-bayes",
            ModelKind::Afinn => "afinn",
            ModelKind::Vader => "vader",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forest" | "random-forest" | "rf" => Ok(ModelKind::Forest),
            "naive-bayes" | "nb" => Ok(ModelKind::NaiveBayes),
            "afinn" => Ok(ModelKind::Afinn),
            "vader" => Ok(ModelKind::Vader),
            other => Err(ModelError::InvalidParameter(format!(
                "unknown model kind '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum TrainedModel {
    Forest(RandomForestModel),
    NaiveBayes(NaiveBayesModel),
    Afinn(LexiconScorerConfig),
    Vader(LexiconScorerConfig),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Forest(_) => ModelKind::Forest,
            TrainedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            TrainedModel::Afinn(_) => ModelKind::Afinn,
            TrainedModel::Vader(_) => ModelKind::Vader,
        }
    }
}

impl SentimentClassifier for TrainedModel {
    fn predict(&self, text: &str) -> Prediction {
        match self {
            TrainedModel::Forest(m) => m.predict(text),
            TrainedModel::NaiveBayes(m) => m.predict(text),
            TrainedModel::Afinn(m) | TrainedModel::Vader(m) => m.predict(text),
        }
    }
}

impl SentimentClassifier for RandomForestModel {
    fn predict(&self, text: &str) -> Prediction {
        RandomForestModel::predict(self, text)
    }
}

impl SentimentClassifier for NaiveBayesModel {
    fn predict(&self, text: &str) -> Prediction {
        NaiveBayesModel::predict(self, text)
    }
}

impl SentimentClassifier for LexiconScorerConfig {
    fn predict(&self, text: &str) -> Prediction {
        LexiconScorerConfig::predict(self, text)
    }
}

impl<T: SentimentClassifier + ?Sized> SentimentClassifier for &T {
    fn predict(&self, text: &str) -> Prediction {
        (**self).predict(text)
    }
}

impl<T: SentimentClassifier + ?Sized> SentimentClassifier for std::sync::Arc<T> {
    fn predict(&self, text: &str) -> Prediction {
        (**self).predict(text)
    }
}

/// Knobs for the trainable models.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub trees: usize,
    pub seed: u64,
    pub alpha: f64,
    pub forest: ForestParams,
    pub vocab: VocabConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            trees: forest::DEFAULT_TREES,
            seed: 0,
            alpha: naive_bayes::DEFAULT_ALPHA,
            forest: ForestParams::default(),
            vocab: VocabConfig::default(),
        }
    }
}

/// Build the vocabulary from `train` and fit a forest or Naive Bayes model.
pub fn train_model(
    kind: ModelKind,
    train: &AnnotatedCorpus,
    opts: &TrainOptions,
) -> Result<TrainedModel, ModelError> {
    if !matches!(kind, ModelKind::Forest | ModelKind::NaiveBayes) {
        return Err(ModelError::InvalidParameter(format!(
            "{kind} is a lexicon scorer and is built from a word list, not trained"
        )));
    }
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let vocab = Vocabulary::build(train, opts.vocab.clone()).map_err(|_| ModelError::EmptyVocabulary)?;
    match kind {
        ModelKind::Forest => {
            train_random_forest(train, &vocab, opts.trees, opts.seed, opts.forest).map(TrainedModel::Forest)
        }
        _ => train_naive_bayes(train, &vocab, opts.alpha).map(TrainedModel::NaiveBayes),
    }
}

pub fn save_model(model: &TrainedModel) -> Vec<u8> {
    let mut out = format!("{ARTIFACT_MAGIC} {ARTIFACT_VERSION} {}\n", model.kind()).into_bytes();
    serde_json::to_writer(&mut out, model).expect("model serializes");
    out.push(b'\n');
    out
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedModel, ModelError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(ModelError::BadMagic)?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| ModelError::BadMagic)?;
    let mut parts = header.split(' ');
    if parts.next() != Some(ARTIFACT_MAGIC) {
        return Err(ModelError::BadMagic);
    }
    let version = parts.next().unwrap_or_default();
    if version != ARTIFACT_VERSION {
        return Err(ModelError::UnsupportedVersion(version.to_string()));
    }
    let declared = parts.next().unwrap_or_default();
    let model: TrainedModel = serde_json::from_slice(&bytes[newline + 1..])
        .map_err(|e| ModelError::Corrupt(e.to_string()))?;
    if model.kind().as_str() != declared {
        return Err(ModelError::KindMismatch {
            header: declared.to_string(),
            payload: model.kind().to_string(),
        });
    }
    if let TrainedModel::Forest(f) = &model {
        f.validate()?;
    }
    Ok(model)
}

pub fn save_model_file(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, save_model(model)).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        error: e,
    })
}

pub fn load_model_file(path: &Path) -> Result<TrainedModel, ModelError> {
    let bytes = fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        error: e,
    })?;
    load_model(&bytes)
}
