//! Word-list scorers: an AFINN-style sentence average and a simplified
//! Vader-lexicon mean, each mapped to the five classes by four cut-points.

use serde::{Deserialize, Serialize};

use super::{ModelError, Prediction};
use crate::corpus::lexicon::Lexicon;
use crate::features::tokenize;
use crate::label::SentimentLabel;

/// Cut-points `t1 < t2 < t3 < t4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Thresholds([f64; 4]);

/// Defaults on the AFINN averaged scale.
pub const AFINN_DEFAULT_THRESHOLDS: [f64; 4] = [-1.5, -0.25, 0.25, 1.5];
/// Defaults on the Vader `[-1, 1]` scale.
pub const VADER_DEFAULT_THRESHOLDS: [f64; 4] = [-0.5, -0.05, 0.05, 0.5];

impl Thresholds {
    /// Ascending cut-points with the neutral band straddling zero.
    pub fn new(t: [f64; 4]) -> Result<Self, ModelError> {
        let th = Self::with_override(t)?;
        if !(t[1] < 0.0 && 0.0 < t[2]) {
            return Err(ModelError::InvalidParameter(format!(
                "neutral band [{}, {}] must contain 0",
                t[1], t[2]
            )));
        }
        Ok(th)
    }

    /// Ascending cut-points without the zero-straddle requirement.
    pub fn with_override(t: [f64; 4]) -> Result<Self, ModelError> {
        if t.iter().any(|x| !x.is_finite()) || !t.windows(2).all(|w| w[0] < w[1]) {
            return Err(ModelError::InvalidParameter(format!(
                "thresholds {t:?} must be strictly ascending"
            )));
        }
        Ok(Self(t))
    }

    pub fn afinn_default() -> Self {
        Self(AFINN_DEFAULT_THRESHOLDS)
    }

    pub fn vader_default() -> Self {
        Self(VADER_DEFAULT_THRESHOLDS)
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for Thresholds {
    type Error = ModelError;

    fn try_from(t: [f64; 4]) -> Result<Self, Self::Error> {
        Self::with_override(t)
    }
}

impl From<Thresholds> for [f64; 4] {
    fn from(t: Thresholds) -> Self {
        t.0
    }
}

/// Sum of matched valences over the total token count of the sentence.
pub fn afinn_score(text: &str, lexicon: &Lexicon) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let sum: f64 = tokens.iter().filter_map(|t| lexicon.valence(t)).sum();
    sum / tokens.len() as f64
}

/// `< t1` very negative, `[t1, t2)` negative, `[t2, t3]` neutral,
/// `(t3, t4]` positive, `> t4` very positive.
pub fn lexicon_classify(score: f64, thresholds: &Thresholds) -> SentimentLabel {
    let [t1, t2, t3, t4] = thresholds.0;
    if score < t1 {
        SentimentLabel::VeryNegative
    } else if score < t2 {
        SentimentLabel::Negative
    } else if score <= t3 {
        SentimentLabel::Neutral
    } else if score <= t4 {
        SentimentLabel::Positive
    } else {
        SentimentLabel::VeryPositive
    }
}

/// Mean valence of matched tokens scaled into `[-1, 1]`; `0` with no match.
pub fn vader_score(text: &str, lexicon: &Lexicon) -> f64 {
    let matched: Vec<f64> = tokenize(text)
        .iter()
        .filter_map(|t| lexicon.valence(t))
        .collect();
    if matched.is_empty() {
        return 0.0;
    }
    let mean = matched.iter().sum::<f64>() / matched.len() as f64;
    (mean / lexicon.kind().max_abs()).clamp(-1.0, 1.0)
}

pub fn vader_lexicon_classify(
    text: &str,
    lexicon: &Lexicon,
    thresholds: &Thresholds,
) -> SentimentLabel {
    lexicon_classify(vader_score(text, lexicon), thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoringRule {
    Afinn,
    Vader,
}

/// A configured lexicon scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconScorerConfig {
    pub rule: ScoringRule,
    pub lexicon: Lexicon,
    pub thresholds: Thresholds,
}

impl LexiconScorerConfig {
    pub fn afinn(lexicon: Lexicon) -> Self {
        Self {
            rule: ScoringRule::Afinn,
            lexicon,
            thresholds: Thresholds::afinn_default(),
        }
    }

    pub fn vader(lexicon: Lexicon) -> Self {
        Self {
            rule: ScoringRule::Vader,
            lexicon,
            thresholds: Thresholds::vader_default(),
        }
    }

    pub fn score(&self, text: &str) -> f64 {
        match self.rule {
            ScoringRule::Afinn => afinn_score(text, &self.lexicon),
            ScoringRule::Vader => vader_score(text, &self.lexicon),
        }
    }

    pub fn classify(&self, text: &str) -> SentimentLabel {
        lexicon_classify(self.score(text), &self.thresholds)
    }

    /// One-hot at the mapped class.
    pub fn predict(&self, text: &str) -> Prediction {
        Prediction::one_hot(self.classify(text))
    }
}
