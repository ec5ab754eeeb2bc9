//! Valence lexicons and the strong-word discretization used to turn a
//! lexicon into single-word training samples.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotatedUtterance, CorpusError, Source};
use crate::label::SentimentLabel;

/// Smallest |valence| that survives discretization.
pub const STRONG_WORD_THRESHOLD: f64 = 2.5;
/// Boundary between the weak and strong grades; the strong class is `|v| > 3.0`.
pub const STRONG_GRADE_BOUNDARY: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexiconKind {
    /// Real valences in `[-4, 4]`.
    Vader,
    /// Integer valences in `[-5, 5]`.
    Afinn,
}

impl LexiconKind {
    pub fn max_abs(self) -> f64 {
        match self {
            LexiconKind::Vader => 4.0,
            LexiconKind::Afinn => 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub valence: f64,
}

impl LexiconEntry {
    pub fn new(word: impl Into<String>, valence: f64) -> Self {
        Self {
            word: word.into(),
            valence,
        }
    }

    pub fn validate(&self, kind: LexiconKind) -> Result<(), CorpusError> {
        let bad = |reason: String| CorpusError::InvalidLexiconEntry {
            word: self.word.clone(),
            reason,
        };
        if self.word.is_empty() {
            return Err(bad("empty word".into()));
        }
        if self.word.to_lowercase() != self.word {
            return Err(bad("word must be lowercase".into()));
        }
        if !self.valence.is_finite() || self.valence.abs() > kind.max_abs() {
            return Err(bad(format!(
                "valence {} outside [-{m}, {m}]",
                self.valence,
                m = kind.max_abs()
            )));
        }
        if kind == LexiconKind::Afinn && self.valence.fract() != 0.0 {
            return Err(bad(format!("valence {} is not an integer", self.valence)));
        }
        Ok(())
    }
}

/// A validated word list with O(1) lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LexiconRepr", into = "LexiconRepr")]
pub struct Lexicon {
    kind: LexiconKind,
    entries: Vec<LexiconEntry>,
    lookup: HashMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct LexiconRepr {
    kind: LexiconKind,
    entries: Vec<LexiconEntry>,
}

impl TryFrom<LexiconRepr> for Lexicon {
    type Error = CorpusError;

    fn try_from(r: LexiconRepr) -> Result<Self, Self::Error> {
        Lexicon::new(r.kind, r.entries)
    }
}

impl From<Lexicon> for LexiconRepr {
    fn from(l: Lexicon) -> Self {
        LexiconRepr {
            kind: l.kind,
            entries: l.entries,
        }
    }
}

impl Lexicon {
    pub fn new(kind: LexiconKind, entries: Vec<LexiconEntry>) -> Result<Self, CorpusError> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for e in &entries {
            e.validate(kind)?;
            if lookup.insert(e.word.clone(), e.valence).is_some() {
                return Err(CorpusError::InvalidLexiconEntry {
                    word: e.word.clone(),
                    reason: "duplicate word".into(),
                });
            }
        }
        Ok(Self {
            kind,
            entries,
            lookup,
        })
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.lookup.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains_key(word)
    }
}

/// Parse `word<TAB>valence` lines. Extra columns are ignored.
pub fn parse_lexicon(content: &str, kind: LexiconKind) -> Result<Lexicon, CorpusError> {
    let mut entries = Vec::new();
    for (i, raw) in content.split('\n').enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split('\t');
        let word = fields.next().unwrap_or_default().trim();
        let valence = fields
            .next()
            .ok_or_else(|| CorpusError::Malformed {
                line,
                reason: "expected word<TAB>valence".into(),
            })?
            .trim()
            .parse::<f64>()
            .map_err(|e| CorpusError::Malformed {
                line,
                reason: format!("bad valence: {e}"),
            })?;
        entries.push(LexiconEntry::new(word, valence));
    }
    Lexicon::new(kind, entries)
}

pub fn load_lexicon(path: &Path, kind: LexiconKind) -> Result<Lexicon, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_lexicon(&content, kind)
}

/// Map a Vader valence onto the strong-word bins.
///
/// `|v| < 2.5` is excluded; `2.5 <= |v| <= 3.0` is the weak grade and
/// `|v| > 3.0` the strong grade. Neutral is never produced.
pub fn discretize_vader(valence: f64) -> Result<Option<SentimentLabel>, CorpusError> {
    if !valence.is_finite() || valence.abs() > LexiconKind::Vader.max_abs() {
        return Err(CorpusError::InvalidLexiconEntry {
            word: String::new(),
            reason: format!("valence {valence} outside [-4, 4]"),
        });
    }
    let magnitude = valence.abs();
    let label = if magnitude < STRONG_WORD_THRESHOLD {
        return Ok(None);
    } else if magnitude > STRONG_GRADE_BOUNDARY {
        SentimentLabel::VeryPositive
    } else {
        SentimentLabel::Positive
    };
    Ok(Some(if valence < 0.0 { label.mirror() } else { label }))
}

/// One single-word `LexiconWord` sample per entry that survives discretization.
pub fn build_lexicon_samples(
    entries: &[LexiconEntry],
) -> Result<Vec<AnnotatedUtterance>, CorpusError> {
    let mut out = Vec::new();
    for e in entries {
        e.validate(LexiconKind::Vader)?;
        if let Some(label) = discretize_vader(e.valence)? {
            out.push(AnnotatedUtterance {
                text: e.word.clone(),
                label,
                source: Source::LexiconWord,
                annotator: None,
                ambiguous: None,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SentimentLabel::*;

    #[test]
    fn bins() {
        assert_eq!(discretize_vader(3.2).unwrap(), Some(VeryPositive));
        assert_eq!(discretize_vader(2.5).unwrap(), Some(Positive));
        assert_eq!(discretize_vader(3.0).unwrap(), Some(Positive));
        assert_eq!(discretize_vader(3.01).unwrap(), Some(VeryPositive));
        assert_eq!(discretize_vader(3.005).unwrap(), Some(VeryPositive));
        assert_eq!(discretize_vader(0.0).unwrap(), None);
        assert_eq!(discretize_vader(2.4999).unwrap(), None);
        assert_eq!(discretize_vader(-2.5).unwrap(), Some(Negative));
        assert_eq!(discretize_vader(-3.0).unwrap(), Some(Negative));
        assert_eq!(discretize_vader(-3.005).unwrap(), Some(VeryNegative));
        assert_eq!(discretize_vader(-4.0).unwrap(), Some(VeryNegative));
        assert!(discretize_vader(4.5).is_err());
        assert!(discretize_vader(f64::NAN).is_err());
    }

    #[test]
    fn samples_from_entries() {
        let s = build_lexicon_samples(&[
            LexiconEntry::new("magnificent", 3.4),
            LexiconEntry::new("ok", 0.9),
        ])
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "magnificent");
        assert_eq!(s[0].label, VeryPositive);
        assert_eq!(s[0].source, Source::LexiconWord);

        let s = build_lexicon_samples(&[LexiconEntry::new("horrible", -2.5)]).unwrap();
        assert_eq!(s[0].label, Negative);
        assert!(build_lexicon_samples(&[]).unwrap().is_empty());
        assert!(build_lexicon_samples(&[LexiconEntry::new("Bad", -2.5)]).is_err());
    }

    #[test]
    fn lexicon_validation() {
        assert!(parse_lexicon("good\t1.9\nbad\t-2.5\n", LexiconKind::Vader).is_ok());
        assert!(parse_lexicon("good\t4.5\n", LexiconKind::Vader).is_err());
        assert!(parse_lexicon("good\t2.5\n", LexiconKind::Afinn).is_err());
        assert!(parse_lexicon("good\t5\n", LexiconKind::Afinn).is_ok());
        assert!(parse_lexicon("good\n", LexiconKind::Vader).is_err());
        assert!(parse_lexicon("a\t1\na\t2\n", LexiconKind::Vader).is_err());
        let lex = parse_lexicon("good\t1.9\t0.3\t[1,2]\n", LexiconKind::Vader).unwrap();
        assert_eq!(lex.valence("good"), Some(1.9));
    }

    proptest! {
        #[test]
        fn odd_symmetry(v in -4.0f64..=4.0) {
            let pos = discretize_vader(v).unwrap();
            let neg = discretize_vader(-v).unwrap();
            prop_assert_eq!(pos.map(SentimentLabel::mirror), neg);
            prop_assert_eq!(pos.is_none(), v.abs() < 2.5);
            prop_assert_ne!(pos, Some(Neutral));
        }
    }
}
