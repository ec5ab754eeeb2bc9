//! Tokenization, vocabulary construction and bag-of-words vectors.
//!
//! Tokens are lowercase runs of alphanumerics with intra-word apostrophes.
//! Every other character separates tokens. A trailing `n't` is split off and
//! emitted as a separate `not`, so `"don't"` becomes `["do", "not"]`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedUtterance;
use crate::fingerprint::Fnv64;

pub const DEFAULT_MAX_SIZE: usize = 5000;
pub const DEFAULT_MIN_FREQUENCY: usize = 1;

/// Tokens the orchestrator and classifiers rely on; no filter may drop them.
pub const NEGATION_TOKENS: [&str; 6] = ["not", "no", "never", "none", "neither", "nor"];

/// Small English stop list, applied only when asked for.
const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "of", "at", "by", "for", "with", "about", "to",
    "from", "in", "on", "is", "are", "was", "were", "be", "been", "am", "it", "its", "this",
    "that", "these", "those", "i", "me", "my", "we", "our", "so", "than", "too", "very", "can",
    "will", "just", "do", "does", "did",
];

pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for piece in lowered.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
        push_piece(piece, &mut tokens);
    }
    tokens
}

fn push_piece(piece: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = piece.chars().collect();
    let mut word = String::with_capacity(piece.len());
    for (i, &c) in chars.iter().enumerate() {
        if c != '\'' {
            word.push(c);
            continue;
        }
        let before = i > 0 && chars[i - 1].is_alphanumeric();
        let after = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if before && after {
            word.push(c);
        }
    }

    let mut negations = 0;
    while let Some(rest) = word.strip_suffix("n't") {
        negations += 1;
        word = rest.trim_end_matches('\'').to_string();
    }
    if !word.is_empty() {
        out.push(word);
    }
    out.extend(std::iter::repeat_n("not".to_string(), negations));
}

/// Vocabulary construction knobs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub max_size: usize,
    pub min_frequency: usize,
    /// Drop common function words. Negation tokens are always kept.
    pub remove_stop_words: bool,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            max_size: DEFAULT_MAX_SIZE,
            min_frequency: DEFAULT_MIN_FREQUENCY,
            remove_stop_words: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("no token survives min_frequency={min_frequency} and max_size={max_size}")]
    NoTokens {
        min_frequency: usize,
        max_size: usize,
    },
}

/// Frequency-ranked token list with dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    config: VocabConfig,
    fingerprint: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    max_size: usize,
    min_frequency: usize,
    remove_stop_words: bool,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = String;

    fn try_from(r: VocabularyRepr) -> Result<Self, Self::Error> {
        let config = VocabConfig {
            max_size: r.max_size,
            min_frequency: r.min_frequency,
            remove_stop_words: r.remove_stop_words,
        };
        Vocabulary::from_tokens(r.tokens, config)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.tokens,
            max_size: v.config.max_size,
            min_frequency: v.config.min_frequency,
            remove_stop_words: v.config.remove_stop_words,
        }
    }
}

impl Vocabulary {
    /// Rank tokens by `(frequency desc, token asc)`, drop those below
    /// `min_frequency`, keep at most `max_size`.
    pub fn build<'a, I>(records: I, config: VocabConfig) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a AnnotatedUtterance>,
    {
        Self::build_from_texts(records.into_iter().map(|r| r.text.as_str()), config)
    }

    pub fn build_from_texts<'a, I>(texts: I, config: VocabConfig) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut any = false;
        for text in texts {
            any = true;
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        if !any {
            return Err(FeatureError::EmptyCorpus);
        }

        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, n)| {
                *n >= config.min_frequency
                    && !(config.remove_stop_words
                        && is_stop_word(tok)
                        && !NEGATION_TOKENS.contains(&tok.as_str()))
            })
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(config.max_size);
        if ranked.is_empty() {
            return Err(FeatureError::NoTokens {
                min_frequency: config.min_frequency,
                max_size: config.max_size,
            });
        }
        let tokens = ranked.into_iter().map(|(t, _)| t).collect();
        Ok(Self::from_tokens(tokens, config).expect("ranked tokens are unique"))
    }

    fn from_tokens(tokens: Vec<String>, config: VocabConfig) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(tokens.len());
        let mut hasher = Fnv64::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.to_lowercase() != *tok {
                return Err(format!("invalid vocabulary token {tok:?}"));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(format!("duplicate vocabulary token {tok:?}"));
            }
            hasher.write(tok.as_bytes());
            hasher.write(&[0xff]);
        }
        Ok(Self {
            tokens,
            index,
            config,
            fingerprint: hasher.finish(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    /// Stable identity derived from the ordered token list.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn vectorize(&self, text: &str) -> BowVector {
        self.vectorize_tokens(&tokenize(text))
    }

    pub fn vectorize_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> BowVector {
        let mut idx: Vec<u32> = tokens.iter().filter_map(|t| self.get(t.as_ref())).collect();
        idx.sort_unstable();
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for i in idx {
            match entries.last_mut() {
                Some((last, n)) if *last == i => *n += 1,
                _ => entries.push((i, 1)),
            }
        }
        BowVector {
            entries,
            vocab_fingerprint: self.fingerprint,
        }
    }
}

fn is_stop_word(tok: &str) -> bool {
    STOP_WORDS.contains(&tok)
}

/// Sparse token counts, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BowVector {
    entries: Vec<(u32, u32)>,
    vocab_fingerprint: u64,
}

impl BowVector {
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn vocab_fingerprint(&self) -> u64 {
        self.vocab_fingerprint
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count for `feature`, zero when absent.
    pub fn count(&self, feature: u32) -> u32 {
        self.entries
            .binary_search_by_key(&feature, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, n)| n as u64).sum()
    }
}
