use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// The two A/B arms: sentiment features off (`Susan`) or on (`Rob`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Susan,
    Rob,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Susan, Arm::Rob];

    pub fn display_name(self) -> &'static str {
        match self {
            Arm::Susan => "Susan",
            Arm::Rob => "Rob",
        }
    }

    pub fn sentiment_enabled(self) -> bool {
        self == Arm::Rob
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "susan" => Ok(Arm::Susan),
            "rob" => Ok(Arm::Rob),
            other => Err(format!("unknown arm '{other}'")),
        }
    }
}

pub const MAX_RATING: u8 = 5;

/// One user's survey answer for one arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub arm: Arm,
    pub understood: bool,
    pub rating: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub n_users: usize,
    pub understood_fraction: f64,
    pub mean_rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbSummary {
    pub susan: ArmSummary,
    pub rob: ArmSummary,
    /// `(mean_rob - mean_susan) / mean_susan`; `None` when Susan's mean is 0.
    pub relative_rating_improvement: Option<f64>,
}

pub fn ab_summary(results: &[SurveyResult]) -> Result<AbSummary, EvalError> {
    if let Some(bad) = results.iter().find(|r| r.rating > MAX_RATING) {
        return Err(EvalError::InvalidRating(bad.rating));
    }
    let arm = |arm: Arm| -> Result<ArmSummary, EvalError> {
        let rows: Vec<&SurveyResult> = results.iter().filter(|r| r.arm == arm).collect();
        if rows.is_empty() {
            return Err(EvalError::EmptyArm(arm));
        }
        let n = rows.len() as f64;
        Ok(ArmSummary {
            arm,
            n_users: rows.len(),
            understood_fraction: rows.iter().filter(|r| r.understood).count() as f64 / n,
            mean_rating: rows.iter().map(|r| r.rating as f64).sum::<f64>() / n,
        })
    };
    let susan = arm(Arm::Susan)?;
    let rob = arm(Arm::Rob)?;
    let relative_rating_improvement = (susan.mean_rating > 0.0)
        .then(|| (rob.mean_rating - susan.mean_rating) / susan.mean_rating);
    Ok(AbSummary {
        susan,
        rob,
        relative_rating_improvement,
    })
}

impl AbSummary {
    pub fn render_table(&self) -> String {
        let mut rows: Vec<[String; 4]> = vec![[
            "Arm".into(),
            "Users".into(),
            "Understood".into(),
            "Mean rating".into(),
        ]];
        for a in [&self.susan, &self.rob] {
            rows.push([
                a.arm.display_name().into(),
                a.n_users.to_string(),
                super::format_percent(a.understood_fraction, 1),
                format!("{:.2}", a.mean_rating),
            ]);
        }
        let mut out = super::report::render_aligned(&rows);
        match self.relative_rating_improvement {
            Some(x) => out.push_str(&format!("Relative rating improvement: {}\n", super::format_percent(x, 2))),
            None => out.push_str("Relative rating improvement: undefined (Susan mean is 0)\n"),
        }
        out
    }
}

/// Survey results from JSON lines. Each line is either a bare survey result or
/// an exported session record (`arm` plus a nullable `survey` object).
pub fn parse_survey_results(content: &str) -> Result<Vec<SurveyResult>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| EvalError::Parse {
            line: i + 1,
            reason: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(bad)?;
        if let Some(survey) = value.get("survey") {
            if survey.is_null() {
                continue;
            }
            #[derive(Deserialize)]
            struct Exported {
                session_id: String,
                arm: Arm,
                survey: Answer,
            }
            #[derive(Deserialize)]
            struct Answer {
                understood: bool,
                rating: u8,
            }
            let e: Exported = serde_json::from_value(value).map_err(bad)?;
            out.push(SurveyResult {
                session_id: Some(e.session_id),
                arm: e.arm,
                understood: e.survey.understood,
                rating: e.survey.rating,
            });
        } else {
            out.push(serde_json::from_value(value).map_err(bad)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm_rows(arm: Arm, ratings: &[u8], understood: usize) -> Vec<SurveyResult> {
        ratings
            .iter()
            .enumerate()
            .map(|(i, &rating)| SurveyResult {
                session_id: None,
                arm,
                understood: i < understood,
                rating,
            })
            .collect()
    }

    #[test]
    fn identical_arms() {
        let mut rows = arm_rows(Arm::Susan, &[3, 4, 2], 1);
        rows.extend(arm_rows(Arm::Rob, &[4, 2, 3], 1));
        let s = ab_summary(&rows).unwrap();
        assert_eq!(s.relative_rating_improvement, Some(0.0));
        assert_eq!(s.susan.understood_fraction, 1.0 / 3.0);
    }

    #[test]
    fn empty_arm_is_named() {
        let err = ab_summary(&arm_rows(Arm::Susan, &[3], 0)).unwrap_err();
        assert!(err.to_string().contains("Rob"), "{err}");
        let err = ab_summary(&arm_rows(Arm::Rob, &[3], 0)).unwrap_err();
        assert!(err.to_string().contains("Susan"), "{err}");
    }

    #[test]
    fn zero_baseline() {
        let mut rows = arm_rows(Arm::Susan, &[0, 0], 0);
        rows.extend(arm_rows(Arm::Rob, &[1], 0));
        assert_eq!(ab_summary(&rows).unwrap().relative_rating_improvement, None);
    }

    #[test]
    fn rating_out_of_range() {
        let mut rows = arm_rows(Arm::Susan, &[6], 0);
        rows.extend(arm_rows(Arm::Rob, &[1], 0));
        assert!(matches!(ab_summary(&rows), Err(EvalError::InvalidRating(6))));
    }

    #[test]
    fn parses_both_line_shapes() {
        let src = concat!(
            r#"{"arm":"susan","understood":true,"rating":2}"#, "\n",
            r#"{"session_id":"ab","arm":"rob","created_at":"x","turns":[],"survey":{"understood":false,"rating":4,"free_text":null}}"#, "\n",
            r#"{"session_id":"cd","arm":"rob","turns":[],"survey":null}"#, "\n",
        );
        let rows = parse_survey_results(src).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].session_id.as_deref(), Some("ab"));
        assert_eq!(rows[1].rating, 4);
        assert!(parse_survey_results("{\"arm\":\"bob\"}").is_err());
    }
}
