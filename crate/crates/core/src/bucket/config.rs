use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BucketError;
use crate::label::SentimentLabel;

/// The shipped configuration, also used as the default.
pub const DEFAULT_GATING_TOML: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/gating.toml"));

/// Phrase lists for the four non-neutral classes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixTable {
    #[serde(default)]
    pub very_negative: Vec<String>,
    #[serde(default)]
    pub negative: Vec<String>,
    #[serde(default)]
    pub positive: Vec<String>,
    #[serde(default)]
    pub very_positive: Vec<String>,
}

impl PrefixTable {
    /// Phrases for `label`; always empty for `Neutral`.
    pub fn phrases(&self, label: SentimentLabel) -> &[String] {
        match label {
            SentimentLabel::VeryNegative => &self.very_negative,
            SentimentLabel::Negative => &self.negative,
            SentimentLabel::Neutral => &[],
            SentimentLabel::Positive => &self.positive,
            SentimentLabel::VeryPositive => &self.very_positive,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SentimentLabel, &String)> {
        SentimentLabel::ALL
            .into_iter()
            .flat_map(move |l| self.phrases(l).iter().map(move |p| (l, p)))
    }

    fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatingConfig {
    /// Mentioning this name directs the sentiment at the bot.
    pub system_name: String,
    #[serde(default = "yes")]
    pub sentiment_enabled: bool,
    pub gating_disabled_bots: BTreeSet<String>,
    pub negation_tokens: BTreeSet<String>,
    #[serde(default)]
    pub negate_bot_responses: bool,
    pub prefixes: PrefixTable,
    /// Optional; falls back to `prefixes` class by class.
    #[serde(default, skip_serializing_if = "PrefixTable::is_empty")]
    pub self_prefixes: PrefixTable,
}

fn yes() -> bool {
    true
}

impl Default for GatingConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_GATING_TOML).expect("shipped gating config is valid")
    }
}

impl GatingConfig {
    pub fn from_toml(src: &str) -> Result<Self, BucketError> {
        let cfg: Self = toml::from_str(src).map_err(|e| BucketError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BucketError> {
        let src = fs::read_to_string(path)
            .map_err(|e| BucketError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("gating config serializes")
    }

    pub fn validate(&self) -> Result<(), BucketError> {
        for label in SentimentLabel::ALL {
            if label == SentimentLabel::Neutral {
                continue;
            }
            if self.prefixes.phrases(label).is_empty() {
                return Err(BucketError::Config(format!(
                    "no prefixes configured for {}",
                    label.display_name()
                )));
            }
        }
        let blank = |p: &String| p.trim().is_empty();
        if self.prefixes.iter().chain(self.self_prefixes.iter()).any(|(_, p)| blank(p)) {
            return Err(BucketError::Config("prefix phrases must not be blank".into()));
        }
        if self.system_name.trim().is_empty() {
            return Err(BucketError::Config("system_name must not be blank".into()));
        }
        Ok(())
    }

    /// The same configuration with sentiment features switched on or off.
    pub fn with_sentiment(&self, enabled: bool) -> Self {
        Self {
            sentiment_enabled: enabled,
            ..self.clone()
        }
    }

    pub fn is_gating_disabled(&self, bot: &str) -> bool {
        self.gating_disabled_bots.contains(bot)
    }

    /// Every configured prefix phrase, both tables.
    pub fn all_prefixes(&self) -> impl Iterator<Item = (SentimentLabel, &String)> {
        self.prefixes.iter().chain(self.self_prefixes.iter())
    }
}
