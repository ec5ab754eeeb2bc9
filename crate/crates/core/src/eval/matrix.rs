//! The experiment matrix: one classification report per configured row.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{classification_report_for, render_aligned_with, ClassificationReport};
use super::split::{split, SplitSpec};
use super::{format_percent, EvalError};
use crate::classifiers::{
    train_model, ForestParams, LexiconScorerConfig, ModelKind, SentimentClassifier, TrainOptions,
    TrainedModel,
};
use crate::classifiers::forest::DEFAULT_TREES;
use crate::classifiers::naive_bayes::DEFAULT_ALPHA;
use crate::corpus::lexicon::Lexicon;
use crate::corpus::{AnnotatedCorpus, AnnotatedUtterance};
use crate::features::VocabConfig;
use crate::label::SentimentLabel;

/// Row order of collapsed reports.
pub const THREE_CLASSES: [SentimentLabel; 3] = [
    SentimentLabel::Negative,
    SentimentLabel::Neutral,
    SentimentLabel::Positive,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Train on one part of the corpus, test on the rest.
    #[default]
    Split,
    /// Train (if the model trains at all) and test on the whole corpus.
    NoSplit,
    /// Train on the external corpus, test on the whole primary corpus.
    CrossCorpus,
}

/// One row of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "five")]
    pub classes: u8,
    /// Add the lexicon-word samples to the training half.
    #[serde(default)]
    pub lexicon_samples: bool,
    #[serde(default)]
    pub exclude_ambiguous: bool,
    #[serde(default)]
    pub eval: EvalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn five() -> u8 {
    5
}

impl ExperimentSpec {
    pub fn new(model: ModelKind, classes: u8, eval: EvalMode) -> Self {
        Self {
            model: model.as_str().into(),
            trees: None,
            alpha: None,
            classes,
            lexicon_samples: false,
            exclude_ambiguous: false,
            eval,
            note: None,
        }
    }

    pub fn forest(classes: u8, trees: usize) -> Self {
        Self {
            trees: Some(trees),
            ..Self::new(ModelKind::Forest, classes, EvalMode::Split)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

pub const TREE_SWEEP: [usize; 5] = [25, 50, 100, 1000, 2000];

impl MatrixConfig {
    pub fn from_toml(src: &str) -> Result<Self, EvalError> {
        toml::from_str(src).map_err(|e| EvalError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("matrix config serializes")
    }

    /// The full comparison: tree sweeps for 3 and 5 classes, the ambiguous
    /// and lexicon-augmented variants, the cross-corpus row when
    /// `with_cross_corpus`, and the lexicon and Naive Bayes baselines.
    pub fn standard(seed: u64, with_cross_corpus: bool) -> Self {
        let mut rows = Vec::new();
        for classes in [3, 5] {
            rows.extend(TREE_SWEEP.map(|t| ExperimentSpec::forest(classes, t)));
        }
        rows.push(ExperimentSpec {
            exclude_ambiguous: true,
            ..ExperimentSpec::forest(5, DEFAULT_TREES)
        });
        rows.push(ExperimentSpec {
            lexicon_samples: true,
            ..ExperimentSpec::forest(5, DEFAULT_TREES)
        });
        if with_cross_corpus {
            rows.push(ExperimentSpec {
                eval: EvalMode::CrossCorpus,
                ..ExperimentSpec::forest(3, 100)
            });
        }
        for kind in [ModelKind::Afinn, ModelKind::Vader] {
            for classes in [3, 5] {
                rows.push(ExperimentSpec::new(kind, classes, EvalMode::NoSplit));
            }
        }
        for (classes, eval) in [
            (5, EvalMode::NoSplit),
            (5, EvalMode::Split),
            (3, EvalMode::NoSplit),
            (3, EvalMode::Split),
        ] {
            rows.push(ExperimentSpec::new(ModelKind::NaiveBayes, classes, eval));
        }
        Self {
            seed,
            split: SplitSpec::seeded(seed),
            forest: ForestParams::default(),
            experiments: rows,
        }
    }
}

/// Everything the rows may draw on.
#[derive(Debug, Clone, Default)]
pub struct MatrixData {
    pub corpus: AnnotatedCorpus,
    pub lexicon_samples: Vec<AnnotatedUtterance>,
    pub afinn: Option<Lexicon>,
    pub vader: Option<Lexicon>,
    pub cross_corpus: Option<AnnotatedCorpus>,
    pub vocab: VocabConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub index: usize,
    pub system: String,
    pub model: ModelKind,
    pub classes: u8,
    pub trees: Option<usize>,
    pub note: String,
    pub train_size: usize,
    pub test_size: usize,
    pub report: ClassificationReport,
}

fn system_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Forest => "Random Forest",
        ModelKind::NaiveBayes => "Naive Bayes",
        ModelKind::Afinn => "AFINN",
        ModelKind::Vader => "Vader lexicon",
    }
}

fn dataset_note(spec: &ExperimentSpec, split: &SplitSpec, cross_len: usize) -> String {
    if let Some(n) = &spec.note {
        return n.clone();
    }
    let train_pct = (split.train_fraction * 100.0).round() as u32;
    let mut note = match spec.eval {
        EvalMode::Split => format!("Training on {train_pct}%, testing on {}%", 100 - train_pct),
        EvalMode::NoSplit => "Tested on all".to_string(),
        EvalMode::CrossCorpus => format!("Trained on {cross_len} external records, tested on all"),
    };
    if spec.lexicon_samples {
        note.push_str(", + lexicon samples in training");
    }
    if spec.exclude_ambiguous {
        note.push_str(", without ambiguous flag");
    }
    note
}

struct Resolved {
    kind: ModelKind,
    trees: Option<usize>,
    alpha: f64,
}

fn resolve(i: usize, spec: &ExperimentSpec, data: &MatrixData) -> Result<Resolved, EvalError> {
    let row = |reason: String| EvalError::Row { row: i + 1, reason };
    let kind: ModelKind = spec
        .model
        .parse()
        .map_err(|_| EvalError::UnknownModelKind(spec.model.clone()))?;
    if !matches!(spec.classes, 3 | 5) {
        return Err(row(format!("classes must be 3 or 5, got {}", spec.classes)));
    }
    if spec.trees.is_some() && kind != ModelKind::Forest {
        return Err(row(format!("'trees' only applies to forest rows, not {kind}")));
    }
    if spec.alpha.is_some() && kind != ModelKind::NaiveBayes {
        return Err(row(format!("'alpha' only applies to naive-bayes rows, not {kind}")));
    }
    let trainable = matches!(kind, ModelKind::Forest | ModelKind::NaiveBayes);
    if spec.lexicon_samples && !trainable {
        return Err(row(format!("{kind} does not train, so lexicon samples cannot be added")));
    }
    if spec.lexicon_samples && data.lexicon_samples.is_empty() {
        return Err(row("lexicon samples requested but none were supplied".into()));
    }
    if spec.eval == EvalMode::CrossCorpus && (!trainable || data.cross_corpus.is_none()) {
        return Err(row("cross-corpus rows need a trainable model and an external corpus".into()));
    }
    if kind == ModelKind::Afinn && data.afinn.is_none() {
        return Err(row("afinn rows need an AFINN word list".into()));
    }
    if kind == ModelKind::Vader && data.vader.is_none() {
        return Err(row("vader rows need a Vader lexicon".into()));
    }
    Ok(Resolved {
        kind,
        trees: (kind == ModelKind::Forest).then(|| spec.trees.unwrap_or(DEFAULT_TREES)),
        alpha: spec.alpha.unwrap_or(DEFAULT_ALPHA),
    })
}

fn run_row(
    i: usize,
    spec: &ExperimentSpec,
    r: &Resolved,
    config: &MatrixConfig,
    data: &MatrixData,
) -> Result<MatrixRow, EvalError> {
    let row_err = |reason: String| EvalError::Row { row: i + 1, reason };
    let collapse = spec.classes == 3;
    let prepare = |c: &AnnotatedCorpus| {
        let c = if spec.exclude_ambiguous {
            c.filter(|u| u.ambiguous != Some(true))
        } else {
            c.clone()
        };
        if collapse {
            c.map_labels(SentimentLabel::collapse)
        } else {
            c
        }
    };
    let corpus = prepare(&data.corpus);
    let (mut train, test) = match spec.eval {
        EvalMode::Split => split(&corpus, &config.split).map_err(|e| row_err(e.to_string()))?,
        EvalMode::NoSplit => (corpus.clone(), corpus),
        EvalMode::CrossCorpus => (prepare(data.cross_corpus.as_ref().expect("checked")), corpus),
    };
    if spec.lexicon_samples {
        train.extend(data.lexicon_samples.iter().map(|u| {
            let mut u = u.clone();
            if collapse {
                u.label = u.label.collapse();
            }
            u
        }));
    }
    if test.is_empty() {
        return Err(row_err("test set is empty".into()));
    }

    let model = match r.kind {
        ModelKind::Forest | ModelKind::NaiveBayes => {
            let opts = TrainOptions {
                trees: r.trees.unwrap_or(DEFAULT_TREES),
                seed: config.seed,
                alpha: r.alpha,
                forest: config.forest,
                vocab: data.vocab.clone(),
            };
            train_model(r.kind, &train, &opts).map_err(|e| row_err(e.to_string()))?
        }
        ModelKind::Afinn => TrainedModel::Afinn(LexiconScorerConfig::afinn(data.afinn.clone().expect("checked"))),
        ModelKind::Vader => TrainedModel::Vader(LexiconScorerConfig::vader(data.vader.clone().expect("checked"))),
    };

    let pairs: Vec<(SentimentLabel, SentimentLabel)> = test
        .iter()
        .map(|u| {
            let p = model.classify(&u.text);
            (u.label, if collapse { p.collapse() } else { p })
        })
        .collect();
    let labels: &[SentimentLabel] = if collapse { &THREE_CLASSES } else { &SentimentLabel::ALL };
    Ok(MatrixRow {
        index: i + 1,
        system: system_name(r.kind).into(),
        model: r.kind,
        classes: spec.classes,
        trees: r.trees,
        note: dataset_note(spec, &config.split, data.cross_corpus.as_ref().map_or(0, |c| c.len())),
        train_size: train.len(),
        test_size: test.len(),
        report: classification_report_for(&pairs, labels),
    })
}

/// Run every row, concurrently, and return them in config order. All rows
/// are validated before any training starts.
pub fn run_experiment_matrix(
    config: &MatrixConfig,
    data: &MatrixData,
) -> Result<Vec<MatrixRow>, EvalError> {
    if config.experiments.is_empty() {
        return Err(EvalError::InvalidConfig("no experiments configured".into()));
    }
    let resolved = config
        .experiments
        .iter()
        .enumerate()
        .map(|(i, s)| resolve(i, s, data))
        .collect::<Result<Vec<_>, _>>()?;
    config
        .experiments
        .par_iter()
        .zip(resolved.par_iter())
        .enumerate()
        .map(|(i, (spec, r))| {
            tracing::debug!(row = i + 1, model = %r.kind, "running experiment");
            run_row(i, spec, r, config, data)
        })
        .collect()
}

fn dash(x: Option<usize>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Per-row precision/recall/F table with category and tree columns.
pub fn render_matrix_table(rows: &[MatrixRow]) -> String {
    let mut cells: Vec<[String; 8]> = vec![[
        "#".into(),
        "System".into(),
        "# of categories".into(),
        "# of trees".into(),
        "Precision".into(),
        "Recall".into(),
        "F-score".into(),
        "Dataset use".into(),
    ]];
    for r in rows {
        let w = &r.report.weighted;
        cells.push([
            r.index.to_string(),
            r.system.clone(),
            r.classes.to_string(),
            dash(r.trees),
            format_percent(w.precision, 1),
            format_percent(w.recall, 1),
            format_percent(w.f1, 1),
            r.note.clone(),
        ]);
    }
    render_aligned_with(&cells, &[0, 1, 7])
}

/// The short system/accuracy/dataset-use summary.
pub fn render_accuracy_table(rows: &[MatrixRow]) -> String {
    let mut cells: Vec<[String; 4]> = vec![[
        "System".into(),
        "Categories".into(),
        "Acc".into(),
        "Dataset use".into(),
    ]];
    for r in rows {
        let system = match r.trees {
            Some(t) => format!("{} ({t} trees)", r.system),
            None => r.system.clone(),
        };
        cells.push([
            system,
            r.classes.to_string(),
            format_percent(r.report.accuracy, 1),
            r.note.clone(),
        ]);
    }
    render_aligned_with(&cells, &[0, 3])
}

pub fn render_matrix_jsonl(rows: &[MatrixRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let w = &r.report.weighted;
        let line = serde_json::json!({
            "index": r.index,
            "system": r.system,
            "model": r.model,
            "classes": r.classes,
            "trees": r.trees,
            "accuracy": r.report.accuracy,
            "precision": w.precision,
            "recall": w.recall,
            "f1": w.f1,
            "support": w.support,
            "train_size": r.train_size,
            "test_size": r.test_size,
            "note": r.note,
        });
        writeln!(out, "{line}").unwrap();
    }
    out
}
