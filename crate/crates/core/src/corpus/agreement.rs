//! Cohen's kappa between two annotators over a shared slice.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{CorpusError, RawAnnotation};
use crate::label::{AnnotationLabel, NUM_CLASSES};

/// Five classes plus `Skip`.
const CATEGORIES: usize = NUM_CLASSES + 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapPair {
    pub text: String,
    pub a: AnnotationLabel,
    pub b: AnnotationLabel,
}

/// Paired labels from two annotators over the same utterances.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationOverlap {
    pub pairs: Vec<OverlapPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KappaMode {
    /// Keep skipped items as a sixth category: a one-sided skip is a
    /// disagreement, and `Skip` takes part in the chance term.
    StrictSkips,
    /// Drop pairs where either side skipped.
    IgnoreSkips,
}

impl FromStr for KappaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict-skips" | "strict" | "StrictSkips" => Ok(KappaMode::StrictSkips),
            "ignore-skips" | "ignore" | "IgnoreSkips" => Ok(KappaMode::IgnoreSkips),
            other => Err(format!("unknown kappa mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KappaError {
    #[error("no annotation pairs left after filtering")]
    Empty,
    #[error("degenerate marginals: chance agreement is 1 but observed agreement is {observed}")]
    DegenerateMarginals { observed: f64 },
}

impl AnnotationOverlap {
    pub fn new(pairs: Vec<OverlapPair>) -> Self {
        Self { pairs }
    }

    pub fn from_labels(pairs: impl IntoIterator<Item = (AnnotationLabel, AnnotationLabel)>) -> Self {
        Self::new(
            pairs
                .into_iter()
                .map(|(a, b)| OverlapPair {
                    text: String::new(),
                    a,
                    b,
                })
                .collect(),
        )
    }

    /// Join two annotation streams on utterance text. Items only one
    /// annotator saw are ignored; the first annotation of a duplicate wins.
    pub fn join(first: &[RawAnnotation], second: &[RawAnnotation]) -> Self {
        let mut pairs = Vec::new();
        for a in first {
            if pairs.iter().any(|p: &OverlapPair| p.text == a.text) {
                continue;
            }
            if let Some(b) = second.iter().find(|b| b.text == a.text) {
                pairs.push(OverlapPair {
                    text: a.text.clone(),
                    a: a.label,
                    b: b.label,
                });
            }
        }
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn filtered(&self, mode: KappaMode) -> impl Iterator<Item = &OverlapPair> {
        self.pairs
            .iter()
            .filter(move |p| mode == KappaMode::StrictSkips || !(p.a.is_skip() || p.b.is_skip()))
    }
}

fn agrees(a: AnnotationLabel, b: AnnotationLabel) -> bool {
    a == b
}

/// `(p_o - p_e) / (1 - p_e)` with marginals over the six categories.
pub fn cohen_kappa(overlap: &AnnotationOverlap, mode: KappaMode) -> Result<f64, KappaError> {
    let mut n: u64 = 0;
    let mut agree: u64 = 0;
    let mut marg_a = [0u64; CATEGORIES];
    let mut marg_b = [0u64; CATEGORIES];
    for p in overlap.filtered(mode) {
        n += 1;
        agree += agrees(p.a, p.b) as u64;
        marg_a[p.a.category()] += 1;
        marg_b[p.b.category()] += 1;
    }
    if n == 0 {
        return Err(KappaError::Empty);
    }
    let chance: u64 = marg_a.iter().zip(&marg_b).map(|(x, y)| x * y).sum();
    let n2 = n * n;
    let p_o = agree as f64 / n as f64;
    // p_e = 1: both sides used one and the same category
    if chance == n2 {
        return if agree == n {
            Ok(1.0)
        } else {
            Err(KappaError::DegenerateMarginals { observed: p_o })
        };
    }
    let p_e = chance as f64 / n2 as f64;
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Mean of the per-overlap kappas.
pub fn kappa_pairwise_mean(
    overlaps: &[AnnotationOverlap],
    mode: KappaMode,
) -> Result<f64, KappaError> {
    if overlaps.is_empty() {
        return Err(KappaError::Empty);
    }
    let mut sum = 0.0;
    for o in overlaps {
        sum += cohen_kappa(o, mode)?;
    }
    Ok(sum / overlaps.len() as f64)
}

/// Kappa over all overlaps pooled into one contingency table.
pub fn kappa_pooled(overlaps: &[AnnotationOverlap], mode: KappaMode) -> Result<f64, KappaError> {
    let pooled = AnnotationOverlap::new(overlaps.iter().flat_map(|o| o.pairs.clone()).collect());
    cohen_kappa(&pooled, mode)
}

/// Parse `text<TAB>label_a<TAB>label_b[<TAB>group]` lines. The optional
/// fourth column names the annotator pair; rows are grouped by it, in order
/// of first appearance. Without it every row lands in one group.
pub fn parse_overlaps(content: &str) -> Result<Vec<AnnotationOverlap>, CorpusError> {
    let mut groups: Vec<(String, AnnotationOverlap)> = Vec::new();
    for (i, raw) in content.split('\n').enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(CorpusError::Malformed {
                line,
                reason: format!("expected text, label_a, label_b[, group]; found {} fields", fields.len()),
            });
        }
        let parse = |tok: &str| {
            tok.trim()
                .parse::<AnnotationLabel>()
                .map_err(|_| CorpusError::UnknownLabel {
                    token: tok.trim().to_string(),
                    line,
                })
        };
        let pair = OverlapPair {
            text: fields[0].to_string(),
            a: parse(fields[1])?,
            b: parse(fields[2])?,
        };
        let group = fields.get(3).map(|g| g.trim()).unwrap_or("").to_string();
        match groups.iter_mut().find(|(g, _)| *g == group) {
            Some((_, o)) => o.pairs.push(pair),
            None => groups.push((group, AnnotationOverlap::new(vec![pair]))),
        }
    }
    Ok(groups.into_iter().map(|(_, o)| o).collect())
}

pub fn load_overlaps(path: &Path) -> Result<Vec<AnnotationOverlap>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_overlaps(&content)
}
