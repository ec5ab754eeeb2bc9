use std::fmt::Write as _;

use serde::Serialize;

use crate::label::{SentimentLabel, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: SentimentLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Support-weighted averages over the reported classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub weighted: WeightedMetrics,
    pub accuracy: f64,
    /// `confusion[gold][predicted]` over all five classes.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Report over all five classes.
pub fn classification_report(
    predictions: &[(SentimentLabel, SentimentLabel)],
) -> ClassificationReport {
    classification_report_for(predictions, &SentimentLabel::ALL)
}

/// Report with one row per entry of `labels`, e.g. the three collapsed
/// classes. Pairs whose gold label is not listed still count toward accuracy
/// but not toward any row.
pub fn classification_report_for(
    predictions: &[(SentimentLabel, SentimentLabel)],
    labels: &[SentimentLabel],
) -> ClassificationReport {
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for &(gold, pred) in predictions {
        confusion[gold.index()][pred.index()] += 1;
    }
    let classes: Vec<ClassMetrics> = labels
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                label,
                precision,
                recall,
                f1: f_score(precision, recall),
                support,
            }
        })
        .collect();

    let support: usize = classes.iter().map(|m| m.support).sum();
    let weigh = |f: fn(&ClassMetrics) -> f64| {
        if support == 0 {
            0.0
        } else {
            classes.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / support as f64
        }
    };
    let weighted = WeightedMetrics {
        precision: weigh(|m| m.precision),
        recall: weigh(|m| m.recall),
        f1: weigh(|m| m.f1),
        support,
    };
    let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
    ClassificationReport {
        classes,
        weighted,
        accuracy: ratio(correct, predictions.len()),
        confusion,
    }
}

/// `x` as a percentage rounded half-up to `decimals` places. The nudge keeps
/// values like `0.685` from landing just below the half.
pub fn round_percent(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    ((x * 100.0 * scale) + 0.5 + 1e-9).floor() / scale
}

pub fn format_percent(x: f64, decimals: u32) -> String {
    format!("{:.*}%", decimals as usize, round_percent(x, decimals))
}

impl ClassificationReport {
    /// Aligned text table: one row per class and a support-weighted total.
    pub fn render_table(&self, decimals: u32) -> String {
        let mut rows: Vec<[String; 5]> = vec![[
            "Annotation".into(),
            "Precision".into(),
            "Recall".into(),
            "F-score".into(),
            "Support".into(),
        ]];
        for m in &self.classes {
            rows.push([
                m.label.display_name().into(),
                format_percent(m.precision, decimals),
                format_percent(m.recall, decimals),
                format_percent(m.f1, decimals),
                m.support.to_string(),
            ]);
        }
        let w = &self.weighted;
        rows.push([
            "Total".into(),
            format_percent(w.precision, decimals),
            format_percent(w.recall, decimals),
            format_percent(w.f1, decimals),
            w.support.to_string(),
        ]);
        let mut out = render_aligned(&rows);
        writeln!(out, "Accuracy: {}", format_percent(self.accuracy, decimals)).unwrap();
        out
    }

    /// One JSON object per class plus a `total` line.
    pub fn render_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.classes {
            let line = serde_json::json!({
                "row": "class",
                "label": m.label.token(),
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            });
            writeln!(out, "{line}").unwrap();
        }
        let w = &self.weighted;
        let line = serde_json::json!({
            "row": "total",
            "precision": w.precision,
            "recall": w.recall,
            "f1": w.f1,
            "support": w.support,
            "accuracy": self.accuracy,
        });
        writeln!(out, "{line}").unwrap();
        out
    }
}

/// Left-align the first column, right-align the rest.
pub(crate) fn render_aligned<const N: usize>(rows: &[[String; N]]) -> String {
    render_aligned_with(rows, &[0])
}

/// Columns listed in `left` are left-aligned, the rest right-aligned.
pub(crate) fn render_aligned_with<const N: usize>(rows: &[[String; N]], left: &[usize]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            let sep = if i == 0 { "" } else { "  " };
            if left.contains(&i) {
                write!(line, "{sep}{cell:<w$}", w = widths[i]).unwrap();
            } else {
                write!(line, "{sep}{cell:>w$}", w = widths[i]).unwrap();
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
