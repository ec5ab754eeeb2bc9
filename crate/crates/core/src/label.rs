//! The five-point polarity scale and the annotation-only `Skip` marker.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Five ordered sentiment classes, most negative first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SentimentLabel {
    VeryNegative,
    Negative,
    Neutral,
    Positive,
    VeryPositive,
}

pub const NUM_CLASSES: usize = 5;

impl SentimentLabel {
    pub const ALL: [SentimentLabel; NUM_CLASSES] = [
        SentimentLabel::VeryNegative,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
        SentimentLabel::VeryPositive,
    ];

    /// Position on the scale, `0` for `VeryNegative` up to `4`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// `-1`, `0` or `+1`.
    pub fn polarity_sign(self) -> i8 {
        match self {
            SentimentLabel::VeryNegative | SentimentLabel::Negative => -1,
            SentimentLabel::Neutral => 0,
            SentimentLabel::Positive | SentimentLabel::VeryPositive => 1,
        }
    }

    /// Polarity mirror: `++` <-> `--`, `+` <-> `-`, `0` stays put.
    pub fn mirror(self) -> Self {
        Self::ALL[NUM_CLASSES - 1 - self.index()]
    }

    /// Merge intensity grades, leaving three classes (`-`, `0`, `+`).
    pub fn collapse(self) -> Self {
        match self {
            SentimentLabel::VeryNegative => SentimentLabel::Negative,
            SentimentLabel::VeryPositive => SentimentLabel::Positive,
            other => other,
        }
    }

    /// Absolute distance on the ordinal scale.
    pub fn distance(self, other: Self) -> usize {
        self.index().abs_diff(other.index())
    }

    /// Schema token used in TSV files.
    pub fn token(self) -> &'static str {
        match self {
            SentimentLabel::VeryNegative => "--",
            SentimentLabel::Negative => "-",
            SentimentLabel::Neutral => "0",
            SentimentLabel::Positive => "+",
            SentimentLabel::VeryPositive => "++",
        }
    }

    /// Long name used in JSONL files and reports.
    pub fn long_name(self) -> &'static str {
        match self {
            SentimentLabel::VeryNegative => "VeryNegative",
            SentimentLabel::Negative => "Negative",
            SentimentLabel::Neutral => "Neutral",
            SentimentLabel::Positive => "Positive",
            SentimentLabel::VeryPositive => "VeryPositive",
        }
    }

    /// Human-readable name as printed in classification reports.
    pub fn display_name(self) -> &'static str {
        match self {
            SentimentLabel::VeryNegative => "Very negative",
            SentimentLabel::Negative => "Negative",
            SentimentLabel::Neutral => "Neutral",
            SentimentLabel::Positive => "Positive",
            SentimentLabel::VeryPositive => "Very positive",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.token() == token)
    }

    pub fn from_long_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.long_name() == name)
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label '{0}'")]
pub struct UnknownLabel(pub String);

impl FromStr for SentimentLabel {
    type Err = UnknownLabel;

    /// Accepts both the schema tokens and the long names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_token(s)
            .or_else(|| Self::from_long_name(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// A raw annotation: either a class or an annotator's refusal to label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnnotationLabel {
    Label(SentimentLabel),
    Skip,
}

pub const SKIP_TOKEN: &str = "skip";

impl AnnotationLabel {
    pub fn label(self) -> Option<SentimentLabel> {
        match self {
            AnnotationLabel::Label(l) => Some(l),
            AnnotationLabel::Skip => None,
        }
    }

    pub fn is_skip(self) -> bool {
        matches!(self, AnnotationLabel::Skip)
    }

    /// Dense category index: the five classes, then `Skip` at 5.
    pub fn category(self) -> usize {
        match self {
            AnnotationLabel::Label(l) => l.index(),
            AnnotationLabel::Skip => NUM_CLASSES,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            AnnotationLabel::Label(l) => l.token(),
            AnnotationLabel::Skip => SKIP_TOKEN,
        }
    }
}

impl From<SentimentLabel> for AnnotationLabel {
    fn from(l: SentimentLabel) -> Self {
        AnnotationLabel::Label(l)
    }
}

impl FromStr for AnnotationLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case(SKIP_TOKEN) {
            Ok(AnnotationLabel::Skip)
        } else {
            s.parse().map(AnnotationLabel::Label)
        }
    }
}

impl fmt::Display for AnnotationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}
