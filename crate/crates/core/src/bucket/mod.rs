//! The response bucket: classify the user turn and each candidate, kick bots
//! that answer with the opposite polarity, pick a response and prepend a
//! sentiment-matched prefix when the response does not already carry one.

mod config;

pub use config::{GatingConfig, PrefixTable, DEFAULT_GATING_TOML};

use serde::{Deserialize, Serialize};

use crate::classifiers::SentimentClassifier;
use crate::features::tokenize;
use crate::fingerprint::Fnv64;
use crate::label::SentimentLabel;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BucketError {
    #[error("no candidate responses")]
    NoCandidates,
    #[error("invalid candidate from '{bot}': {reason}")]
    InvalidCandidate { bot: String, reason: String },
    #[error("gating config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BotResponse {
    pub bot_name: String,
    pub text: String,
    /// Higher wins.
    pub priority: i32,
}

impl BotResponse {
    pub fn new(bot_name: impl Into<String>, text: impl Into<String>, priority: i32) -> Self {
        Self {
            bot_name: bot_name.into(),
            text: text.into(),
            priority,
        }
    }
}

/// Who the user's sentiment is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    System,
    Other,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuppressionReason {
    SentimentDisabled,
    NeutralUser,
    BotGatingDisabled,
    /// Every candidate was kicked and the fallback answers with the opposite
    /// polarity; a prefix would put both polarities in one output.
    ConflictingFallback,
    SameSentimentAlready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// All candidates were kicked; the least conflicting one was used.
    LeastConflicting,
}

/// One candidate as the bucket saw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub bot_name: String,
    pub priority: i32,
    pub text: String,
    /// `None` when the bot is gating-disabled or sentiment is off.
    pub label: Option<SentimentLabel>,
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kick {
    pub bot_name: String,
    pub label: SentimentLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefix {
    pub text: String,
    pub label: SentimentLabel,
    pub self_directed: bool,
}

/// Identifies a turn for the deterministic prefix choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnContext {
    pub session_id: String,
    pub turn: u64,
    pub seed: u64,
}

impl TurnContext {
    pub fn new(session_id: impl Into<String>, turn: u64, seed: u64) -> Self {
        Self {
            session_id: session_id.into(),
            turn,
            seed,
        }
    }
}

/// Everything decided for one turn; serialized as the per-turn log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketDecision {
    pub sentiment_enabled: bool,
    /// Classifier output for the user turn.
    pub user_label_raw: Option<SentimentLabel>,
    /// After the negation flip.
    pub user_label: Option<SentimentLabel>,
    pub negated: bool,
    pub target: Target,
    pub candidates: Vec<CandidateOutcome>,
    pub kicked: Vec<Kick>,
    pub selected: BotResponse,
    pub selected_label: Option<SentimentLabel>,
    pub fallback: Option<Fallback>,
    pub prefix: Option<Prefix>,
    pub prefix_suppressed_reason: Option<SuppressionReason>,
}

pub fn has_negation(tokens: &[String], config: &GatingConfig) -> bool {
    tokens.iter().any(|t| config.negation_tokens.contains(t))
}

/// Mirror `label` if any negation token is present.
pub fn detect_negation_flip(
    tokens: &[String],
    label: SentimentLabel,
    config: &GatingConfig,
) -> SentimentLabel {
    if has_negation(tokens, config) {
        label.mirror()
    } else {
        label
    }
}

const SECOND_PERSON: &[&str] = &[
    "you", "your", "yours", "yourself", "you're", "you've", "you'll", "you'd", "u", "ur",
];
const THIRD_PARTY: &[&str] = &[
    "he", "she", "they", "him", "her", "them", "his", "hers", "their", "theirs", "it", "its",
    "my", "mine", "people", "everyone", "somebody", "someone",
];

pub fn detect_target(text: &str, config: &GatingConfig) -> Target {
    let tokens = tokenize(text);
    let name = config.system_name.to_lowercase();
    if tokens.iter().any(|t| SECOND_PERSON.contains(&t.as_str()) || *t == name) {
        Target::System
    } else if tokens.iter().any(|t| THIRD_PARTY.contains(&t.as_str())) {
        Target::Other
    } else {
        Target::Unknown
    }
}

fn opposite(a: SentimentLabel, b: SentimentLabel) -> bool {
    a.polarity_sign() * b.polarity_sign() == -1
}

fn phrase_index(ctx: &TurnContext, n: usize) -> usize {
    let mut h = Fnv64::new();
    h.write(&ctx.seed.to_le_bytes());
    h.write(ctx.session_id.as_bytes());
    h.write(&[0]);
    h.write(&ctx.turn.to_le_bytes());
    (h.finish() % n as u64) as usize
}

/// Highest priority wins; ties go to the earlier candidate.
fn best<'a>(items: impl Iterator<Item = (usize, &'a CandidateOutcome)>) -> Option<usize> {
    let mut best: Option<(usize, i32)> = None;
    for (i, c) in items {
        if best.is_none_or(|(_, p)| c.priority > p) {
            best = Some((i, c.priority));
        }
    }
    best.map(|(i, _)| i)
}

pub fn gate_and_select(
    user_text: &str,
    candidates: &[BotResponse],
    model: &dyn SentimentClassifier,
    config: &GatingConfig,
    ctx: &TurnContext,
) -> Result<BucketDecision, BucketError> {
    if candidates.is_empty() {
        return Err(BucketError::NoCandidates);
    }
    for c in candidates {
        if c.bot_name.trim().is_empty() || c.text.trim().is_empty() {
            return Err(BucketError::InvalidCandidate {
                bot: c.bot_name.clone(),
                reason: "bot name and text must be non-empty".into(),
            });
        }
    }
    let enabled = config.sentiment_enabled;
    let tokens = tokenize(user_text);
    let target = detect_target(user_text, config);

    let (user_raw, user_label) = if enabled {
        let raw = model.classify(user_text);
        (Some(raw), Some(detect_negation_flip(&tokens, raw, config)))
    } else {
        (None, None)
    };

    let outcomes: Vec<CandidateOutcome> = candidates
        .iter()
        .map(|c| {
            let gated = enabled && !config.is_gating_disabled(&c.bot_name);
            let label = gated.then(|| {
                let l = model.classify(&c.text);
                if config.negate_bot_responses {
                    detect_negation_flip(&tokenize(&c.text), l, config)
                } else {
                    l
                }
            });
            CandidateOutcome {
                bot_name: c.bot_name.clone(),
                priority: c.priority,
                text: c.text.clone(),
                label,
                gated,
            }
        })
        .collect();

    let mut kicked_idx: Vec<usize> = match user_label {
        Some(u) => outcomes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.label.is_some_and(|l| opposite(l, u)))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };

    let survivors = outcomes.iter().enumerate().filter(|(i, _)| !kicked_idx.contains(i));
    let (selected_idx, fallback) = match best(survivors) {
        Some(i) => (i, None),
        None => {
            // everything was kicked: least class distance, then priority
            let u = user_label.expect("kicks imply a user label");
            let min = outcomes
                .iter()
                .filter_map(|c| c.label.map(|l| l.distance(u)))
                .min()
                .expect("kicked candidates are labelled");
            let i = best(
                outcomes
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.label.map(|l| l.distance(u)) == Some(min)),
            )
            .expect("at least one candidate at min distance");
            kicked_idx.retain(|&k| k != i);
            (i, Some(Fallback::LeastConflicting))
        }
    };
    let selected = &outcomes[selected_idx];

    let suppressed = match (user_label, selected.label) {
        _ if !enabled => Some(SuppressionReason::SentimentDisabled),
        (Some(SentimentLabel::Neutral), _) => Some(SuppressionReason::NeutralUser),
        (_, None) => Some(SuppressionReason::BotGatingDisabled),
        (Some(u), Some(s)) if opposite(u, s) => Some(SuppressionReason::ConflictingFallback),
        (Some(u), Some(s)) if u.polarity_sign() == s.polarity_sign() => {
            Some(SuppressionReason::SameSentimentAlready)
        }
        _ => None,
    };
    let prefix = match (suppressed, user_label) {
        (None, Some(u)) => {
            let self_phrases = config.self_prefixes.phrases(u);
            let self_directed = target == Target::System && !self_phrases.is_empty();
            let phrases = if self_directed { self_phrases } else { config.prefixes.phrases(u) };
            Some(Prefix {
                text: phrases[phrase_index(ctx, phrases.len())].clone(),
                label: u,
                self_directed,
            })
        }
        _ => None,
    };

    Ok(BucketDecision {
        sentiment_enabled: enabled,
        user_label_raw: user_raw,
        user_label,
        negated: enabled && has_negation(&tokens, config),
        target,
        kicked: kicked_idx
            .iter()
            .map(|&i| Kick {
                bot_name: outcomes[i].bot_name.clone(),
                label: outcomes[i].label.expect("kicked candidates are labelled"),
            })
            .collect(),
        selected: candidates[selected_idx].clone(),
        selected_label: selected.label,
        fallback,
        prefix,
        prefix_suppressed_reason: suppressed,
        candidates: outcomes,
    })
}

/// Prefix, one space, then the selected text.
pub fn render_final(decision: &BucketDecision) -> String {
    match &decision.prefix {
        Some(p) => format!("{} {}", p.text, decision.selected.text),
        None => decision.selected.text.clone(),
    }
}
