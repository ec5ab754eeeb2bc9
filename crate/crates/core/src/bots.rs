//! Deterministic rule-table bots standing in for the real ensemble.
//!
//! Rule file: one `pattern<TAB>priority<TAB>response` per line, `#` comments,
//! and an optional `# kind: <kind>` header (otherwise the kind comes from the
//! bot name). Patterns are case-insensitive substrings, `tokens:a b` (all
//! tokens present) or `*`. Responses may hold several `|`-separated
//! alternatives and the placeholders `{input}`, `{after}` (text following a
//! substring match) and `{prev}` (the previous user turn).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bucket::BotResponse;
use crate::features::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BotError {
    #[error("{bot} line {line}: {reason}")]
    Rule {
        bot: String,
        line: usize,
        reason: String,
    },
    #[error("fallback bot '{0}' needs a final '*' rule")]
    FallbackWithoutCatchAll(String),
    #[error("no fallback bot configured")]
    NoFallback,
    #[error("duplicate bot name '{0}'")]
    Duplicate(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BotKind {
    Persona,
    Facts,
    Jokes,
    News,
    Weather,
    Wiki,
    Fallback,
}

impl BotKind {
    pub const ALL: [BotKind; 7] = [
        BotKind::Persona,
        BotKind::Facts,
        BotKind::Jokes,
        BotKind::News,
        BotKind::Weather,
        BotKind::Wiki,
        BotKind::Fallback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BotKind::Persona => "persona",
            BotKind::Facts => "facts",
            BotKind::Jokes => "jokes",
            BotKind::News => "news",
            BotKind::Weather => "weather",
            BotKind::Wiki => "wiki",
            BotKind::Fallback => "fallback",
        }
    }
}

impl fmt::Display for BotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown bot kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Any,
    /// Lowercased substring.
    Substring(String),
    /// Every token must occur.
    Tokens(Vec<String>),
}

impl Pattern {
    fn parse(src: &str) -> Result<Self, String> {
        let src = src.trim();
        if src == "*" {
            return Ok(Pattern::Any);
        }
        if let Some(rest) = src.strip_prefix("tokens:") {
            let toks = tokenize(rest);
            if toks.is_empty() {
                return Err("token pattern has no tokens".into());
            }
            return Ok(Pattern::Tokens(toks));
        }
        if src.is_empty() {
            return Err("empty pattern".into());
        }
        Ok(Pattern::Substring(src.to_lowercase()))
    }

    /// On a match, the text after the matched part (empty if not a substring).
    fn matches(&self, lower: &str, tokens: &[String]) -> Option<String> {
        match self {
            Pattern::Any => Some(String::new()),
            Pattern::Tokens(want) => want
                .iter()
                .all(|w| tokens.contains(w))
                .then(String::new),
            Pattern::Substring(s) => lower
                .find(s.as_str())
                .map(|at| lower[at + s.len()..].trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pattern: Pattern,
    pub priority: i32,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubBot {
    pub name: String,
    pub kind: BotKind,
    pub rules: Vec<Rule>,
}

impl StubBot {
    pub fn parse(name: &str, content: &str) -> Result<Self, BotError> {
        let err = |line: usize, reason: String| BotError::Rule {
            bot: name.to_string(),
            line,
            reason,
        };
        let mut kind = None;
        let mut rules = Vec::new();
        for (i, raw) in content.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("kind:") {
                    kind = Some(k.parse::<BotKind>().map_err(|e| err(line, e))?);
                }
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(line, format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let pattern = Pattern::parse(fields[0]).map_err(|e| err(line, e))?;
            let priority = fields[1]
                .trim()
                .parse::<i32>()
                .map_err(|e| err(line, format!("bad priority '{}': {e}", fields[1].trim())))?;
            let responses: Vec<String> = fields[2]
                .split('|')
                .map(|r| r.trim().to_string())
                .collect();
            if responses.iter().any(|r| r.is_empty()) {
                return Err(err(line, "empty response".into()));
            }
            rules.push(Rule {
                pattern,
                priority,
                responses,
            });
        }
        let kind = match kind {
            Some(k) => k,
            None => name
                .parse::<BotKind>()
                .map_err(|e| err(0, format!("{e}; add a '# kind:' header")))?,
        };
        let bot = Self {
            name: name.to_string(),
            kind,
            rules,
        };
        if kind == BotKind::Fallback && bot.rules.last().map(|r| &r.pattern) != Some(&Pattern::Any) {
            return Err(BotError::FallbackWithoutCatchAll(bot.name));
        }
        Ok(bot)
    }

    /// First matching rule, instantiated. `context` holds earlier user turns,
    /// oldest first.
    pub fn respond(&self, user_text: &str, context: &[String]) -> Option<BotResponse> {
        let lower = user_text.to_lowercase();
        let tokens = tokenize(user_text);
        self.rules.iter().find_map(|rule| {
            let after = rule.pattern.matches(&lower, &tokens)?;
            let template = &rule.responses[context.len() % rule.responses.len()];
            let after = if after.is_empty() { "that" } else { after.as_str() };
            let prev = context.last().map_or("that", |s| s.trim());
            let text = template
                .replace("{input}", user_text.trim())
                .replace("{after}", after)
                .replace("{prev}", prev);
            Some(BotResponse::new(self.name.clone(), text, rule.priority))
        })
    }
}

const SHIPPED: &[(&str, &str)] = &[
    ("facts", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/facts.tsv"))),
    ("fallback", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/fallback.tsv"))),
    ("jokes", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/jokes.tsv"))),
    ("news", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/news.tsv"))),
    ("persona", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/persona.tsv"))),
    ("weather", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/weather.tsv"))),
    ("wiki", include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bots/wiki.tsv"))),
];

/// A set of bots with at least one fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BotEnsemble {
    bots: Vec<StubBot>,
}

impl BotEnsemble {
    pub fn new(bots: Vec<StubBot>) -> Result<Self, BotError> {
        for (i, b) in bots.iter().enumerate() {
            if bots[..i].iter().any(|o| o.name == b.name) {
                return Err(BotError::Duplicate(b.name.clone()));
            }
        }
        if !bots.iter().any(|b| b.kind == BotKind::Fallback) {
            return Err(BotError::NoFallback);
        }
        Ok(Self { bots })
    }

    /// The bundled rule sets.
    pub fn shipped() -> Self {
        let bots = SHIPPED
            .iter()
            .map(|(name, src)| StubBot::parse(name, src).expect("shipped bot rules are valid"))
            .collect();
        Self::new(bots).expect("shipped bots include a fallback")
    }

    /// Every `*.tsv` in `dir`, in file-name order; the stem is the bot name.
    pub fn load_dir(dir: &Path) -> Result<Self, BotError> {
        let io = |e: std::io::Error| BotError::Io {
            path: dir.display().to_string(),
            reason: e.to_string(),
        };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        paths.sort();
        let mut bots = Vec::new();
        for p in paths {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let src = fs::read_to_string(&p).map_err(|e| BotError::Io {
                path: p.display().to_string(),
                reason: e.to_string(),
            })?;
            bots.push(StubBot::parse(&name, &src)?);
        }
        Self::new(bots)
    }

    pub fn bots(&self) -> &[StubBot] {
        &self.bots
    }

    /// One candidate per bot that has a matching rule; never empty.
    pub fn candidates(&self, user_text: &str, context: &[String]) -> Vec<BotResponse> {
        self.bots
            .iter()
            .filter_map(|b| b.respond(user_text, context))
            .collect()
    }
}
