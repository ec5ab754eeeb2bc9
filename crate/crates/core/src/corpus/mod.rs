//! Annotated corpora, lexicons, candidate sampling and annotator agreement.
//!
//! Corpus files are UTF-8 with LF line endings, in one of two formats:
//!
//! * TSV: `text<TAB>label[<TAB>annotator_id]`, labels as `--`, `-`, `0`, `+`, `++`.
//! * JSONL: one object per line with `text`, `label` (long name such as
//!   `"VeryPositive"`), and optional `source`, `annotator`, `ambiguous`.
//!
//! Raw annotation streams may additionally carry the literal label `skip`.

pub mod agreement;
pub mod lexicon;
pub mod sampling;
pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::label::{AnnotationLabel, SentimentLabel, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Source {
    #[default]
    HumanAnnotated,
    LexiconWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from the file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format '{other}'")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {error}")]
    Io {
        path: PathBuf,
        error: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown label '{token}' at line {line}")]
    UnknownLabel { token: String, line: usize },
    #[error("'skip' is not a trainable label (line {line})")]
    SkipInCorpus { line: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid lexicon entry '{word}': {reason}")]
    InvalidLexiconEntry { word: String, reason: String },
    #[error("{requested} utterances requested but only {available} available")]
    Insufficient { requested: usize, available: usize },
}

impl CorpusError {
    fn io(path: &Path, error: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            error,
        }
    }
}

/// One labelled utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedUtterance {
    pub text: String,
    pub label: SentimentLabel,
    pub source: Source,
    pub annotator: Option<String>,
    /// Set when annotators flagged the record as ambiguous.
    pub ambiguous: Option<bool>,
}

impl AnnotatedUtterance {
    pub fn new(
        text: impl Into<String>,
        label: SentimentLabel,
        source: Source,
    ) -> Result<Self, CorpusError> {
        let u = Self {
            text: text.into(),
            label,
            source,
            annotator: None,
            ambiguous: None,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn human(text: impl Into<String>, label: SentimentLabel) -> Result<Self, CorpusError> {
        Self::new(text, label, Source::HumanAnnotated)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.text.trim().is_empty() {
            return Err(CorpusError::InvalidRecord("empty text".into()));
        }
        if self.source == Source::LexiconWord && self.label == SentimentLabel::Neutral {
            return Err(CorpusError::InvalidRecord(format!(
                "lexicon-word sample '{}' cannot be Neutral",
                self.text
            )));
        }
        Ok(())
    }
}

/// Ordered collection of labelled utterances.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedCorpus {
    records: Vec<AnnotatedUtterance>,
}

impl AnnotatedCorpus {
    pub fn new(records: Vec<AnnotatedUtterance>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[AnnotatedUtterance] {
        &self.records
    }

    pub fn into_records(self) -> Vec<AnnotatedUtterance> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedUtterance> {
        self.records.iter()
    }

    pub fn push(&mut self, record: AnnotatedUtterance) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = AnnotatedUtterance>) {
        self.records.extend(records);
    }

    /// Per-class record counts, indexed by [`SentimentLabel::index`].
    pub fn label_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for r in &self.records {
            counts[r.label.index()] += 1;
        }
        counts
    }

    pub fn distinct_labels(&self) -> usize {
        self.label_counts().iter().filter(|&&n| n > 0).count()
    }

    /// Relabel every record, e.g. to merge intensity grades.
    pub fn map_labels(&self, f: impl Fn(SentimentLabel) -> SentimentLabel) -> Self {
        Self::new(
            self.records
                .iter()
                .map(|r| AnnotatedUtterance {
                    label: f(r.label),
                    ..r.clone()
                })
                .collect(),
        )
    }

    pub fn filter(&self, keep: impl Fn(&AnnotatedUtterance) -> bool) -> Self {
        Self::new(self.records.iter().filter(|r| keep(r)).cloned().collect())
    }
}

impl<'a> IntoIterator for &'a AnnotatedCorpus {
    type Item = &'a AnnotatedUtterance;
    type IntoIter = std::slice::Iter<'a, AnnotatedUtterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

impl FromIterator<AnnotatedUtterance> for AnnotatedCorpus {
    fn from_iter<T: IntoIterator<Item = AnnotatedUtterance>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    text: String,
    label: String,
    #[serde(default)]
    source: Source,
    #[serde(default)]
    annotator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ambiguous: Option<bool>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<AnnotatedCorpus, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_corpus(&content, format)
}

pub fn parse_corpus(content: &str, format: CorpusFormat) -> Result<AnnotatedCorpus, CorpusError> {
    match format {
        CorpusFormat::Tsv => parse_tsv(content),
        CorpusFormat::Jsonl => parse_jsonl(content),
    }
}

fn lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_label(token: &str, line: usize) -> Result<SentimentLabel, CorpusError> {
    match token.parse::<AnnotationLabel>() {
        Ok(AnnotationLabel::Label(l)) => Ok(l),
        Ok(AnnotationLabel::Skip) => Err(CorpusError::SkipInCorpus { line }),
        Err(_) => Err(CorpusError::UnknownLabel {
            token: token.to_string(),
            line,
        }),
    }
}

fn check_text(text: &str, line: usize) -> Result<(), CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "empty text".into(),
        });
    }
    Ok(())
}

fn parse_tsv(content: &str) -> Result<AnnotatedCorpus, CorpusError> {
    let mut records = Vec::new();
    for (line, raw) in lines(content) {
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(CorpusError::Malformed {
                line,
                reason: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            });
        }
        check_text(fields[0], line)?;
        let label = parse_label(fields[1].trim(), line)?;
        let annotator = fields
            .get(2)
            .map(|a| a.trim())
            .filter(|a| !a.is_empty())
            .map(str::to_string);
        records.push(AnnotatedUtterance {
            text: fields[0].to_string(),
            label,
            source: Source::HumanAnnotated,
            annotator,
            ambiguous: None,
        });
    }
    Ok(AnnotatedCorpus::new(records))
}

fn parse_jsonl(content: &str) -> Result<AnnotatedCorpus, CorpusError> {
    let mut records = Vec::new();
    for (line, raw) in lines(content) {
        let rec: JsonRecord = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
            line,
            reason: e.to_string(),
        })?;
        check_text(&rec.text, line)?;
        let label = parse_label(&rec.label, line)?;
        let utt = AnnotatedUtterance {
            text: rec.text,
            label,
            source: rec.source,
            annotator: rec.annotator,
            ambiguous: rec.ambiguous,
        };
        utt.validate().map_err(|e| CorpusError::Malformed {
            line,
            reason: e.to_string(),
        })?;
        records.push(utt);
    }
    Ok(AnnotatedCorpus::new(records))
}

pub fn render_corpus(corpus: &AnnotatedCorpus, format: CorpusFormat) -> Result<String, CorpusError> {
    let mut out = String::new();
    for r in corpus {
        match format {
            CorpusFormat::Tsv => {
                if r.text.contains(['\t', '\n', '\r']) {
                    return Err(CorpusError::InvalidRecord(format!(
                        "text {:?} cannot be stored in TSV",
                        r.text
                    )));
                }
                out.push_str(&r.text);
                out.push('\t');
                out.push_str(r.label.token());
                if let Some(a) = &r.annotator {
                    let _ = write!(out, "\t{a}");
                }
            }
            CorpusFormat::Jsonl => {
                let rec = JsonRecord {
                    text: r.text.clone(),
                    label: r.label.long_name().to_string(),
                    source: r.source,
                    annotator: r.annotator.clone(),
                    ambiguous: r.ambiguous,
                };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(
    corpus: &AnnotatedCorpus,
    path: &Path,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let body = render_corpus(corpus, format)?;
    fs::write(path, body).map_err(|e| CorpusError::io(path, e))
}

/// A single raw annotation, possibly a skip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAnnotation {
    pub text: String,
    pub label: AnnotationLabel,
    pub annotator: Option<String>,
}

/// Parse a raw annotation stream in the TSV layout, where `skip` is legal.
pub fn parse_annotations(content: &str) -> Result<Vec<RawAnnotation>, CorpusError> {
    let mut out = Vec::new();
    for (line, raw) in lines(content) {
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(CorpusError::Malformed {
                line,
                reason: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            });
        }
        check_text(fields[0], line)?;
        let label = fields[1]
            .trim()
            .parse::<AnnotationLabel>()
            .map_err(|_| CorpusError::UnknownLabel {
                token: fields[1].trim().to_string(),
                line,
            })?;
        out.push(RawAnnotation {
            text: fields[0].to_string(),
            label,
            annotator: fields.get(2).map(|a| a.trim().to_string()),
        });
    }
    Ok(out)
}

/// Drop skipped records, keeping the rest as human annotations.
pub fn corpus_from_annotations(raw: &[RawAnnotation]) -> AnnotatedCorpus {
    raw.iter()
        .filter_map(|r| {
            r.label.label().map(|label| AnnotatedUtterance {
                text: r.text.clone(),
                label,
                source: Source::HumanAnnotated,
                annotator: r.annotator.clone(),
                ambiguous: None,
            })
        })
        .collect()
}
