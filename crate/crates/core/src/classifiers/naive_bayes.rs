//! Multinomial Naive Bayes with additive smoothing.
//!
//! The model is stored as raw counts; log tables are derived on
//! construction so that serialized artifacts carry no infinities.

use serde::{Deserialize, Serialize};

use super::{ModelError, Prediction};
use crate::corpus::AnnotatedCorpus;
use crate::features::{BowVector, Vocabulary};
use crate::label::NUM_CLASSES;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NaiveBayesCounts {
    vocab: Vocabulary,
    alpha: f64,
    class_counts: [u64; NUM_CLASSES],
    /// `token_counts[token][class]`
    token_counts: Vec<[u64; NUM_CLASSES]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NaiveBayesCounts", into = "NaiveBayesCounts")]
pub struct NaiveBayesModel {
    counts: NaiveBayesCounts,
    /// `None` for classes never seen in training.
    log_priors: [Option<f64>; NUM_CLASSES],
    /// `log_likelihoods[token][class]`
    log_likelihoods: Vec<[f64; NUM_CLASSES]>,
}

impl TryFrom<NaiveBayesCounts> for NaiveBayesModel {
    type Error = ModelError;

    fn try_from(c: NaiveBayesCounts) -> Result<Self, Self::Error> {
        NaiveBayesModel::from_counts(c.vocab, c.alpha, c.class_counts, c.token_counts)
    }
}

impl From<NaiveBayesModel> for NaiveBayesCounts {
    fn from(m: NaiveBayesModel) -> Self {
        m.counts
    }
}

impl NaiveBayesModel {
    /// Build from sufficient statistics: documents per class and token
    /// occurrences per class.
    pub fn from_counts(
        vocab: Vocabulary,
        alpha: f64,
        class_counts: [u64; NUM_CLASSES],
        token_counts: Vec<[u64; NUM_CLASSES]>,
    ) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if token_counts.len() != vocab.len() {
            return Err(ModelError::Corrupt(format!(
                "likelihood table has {} rows for {} tokens",
                token_counts.len(),
                vocab.len()
            )));
        }
        let total_docs: u64 = class_counts.iter().sum();
        if total_docs == 0 {
            return Err(ModelError::EmptyTrainingSet);
        }
        if class_counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(ModelError::SingleClass);
        }

        let log_priors = class_counts
            .map(|c| (c > 0).then(|| (c as f64).ln() - (total_docs as f64).ln()));
        let mut class_tokens = [0u64; NUM_CLASSES];
        for row in &token_counts {
            for c in 0..NUM_CLASSES {
                class_tokens[c] += row[c];
            }
        }
        let denom = class_tokens.map(|t| (t as f64 + alpha * vocab.len() as f64).ln());
        let log_likelihoods = token_counts
            .iter()
            .map(|row| std::array::from_fn(|c| (row[c] as f64 + alpha).ln() - denom[c]))
            .collect();

        Ok(Self {
            counts: NaiveBayesCounts {
                vocab,
                alpha,
                class_counts,
                token_counts,
            },
            log_priors,
            log_likelihoods,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.counts.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.counts.alpha
    }

    pub fn class_counts(&self) -> &[u64; NUM_CLASSES] {
        &self.counts.class_counts
    }

    pub fn token_counts(&self) -> &[[u64; NUM_CLASSES]] {
        &self.counts.token_counts
    }

    pub fn log_priors(&self) -> &[Option<f64>; NUM_CLASSES] {
        &self.log_priors
    }

    /// `ln P(token | class)`, if the token is in the vocabulary.
    pub fn log_likelihood(&self, token: &str, class: usize) -> Option<f64> {
        let i = self.counts.vocab.get(token)?;
        Some(self.log_likelihoods[i as usize][class])
    }

    pub fn predict_vector(&self, x: &BowVector) -> Prediction {
        let mut joint = [f64::NEG_INFINITY; NUM_CLASSES];
        for (c, prior) in self.log_priors.iter().enumerate() {
            if let Some(p) = prior {
                joint[c] = p + x
                    .entries()
                    .iter()
                    .map(|&(f, n)| n as f64 * self.log_likelihoods[f as usize][c])
                    .sum::<f64>();
            }
        }
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm = joint.map(|j| if j.is_finite() { (j - max).exp() } else { 0.0 });
        let z: f64 = unnorm.iter().sum();
        Prediction::from_distribution(unnorm.map(|u| u / z))
    }

    pub fn predict(&self, text: &str) -> Prediction {
        self.predict_vector(&self.counts.vocab.vectorize(text))
    }
}

pub fn train_naive_bayes(
    train: &AnnotatedCorpus,
    vocab: &Vocabulary,
    alpha: f64,
) -> Result<NaiveBayesModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut class_counts = [0u64; NUM_CLASSES];
    let mut token_counts = vec![[0u64; NUM_CLASSES]; vocab.len()];
    for r in train {
        let c = r.label.index();
        class_counts[c] += 1;
        for &(f, n) in vocab.vectorize(&r.text).entries() {
            token_counts[f as usize][c] += n as u64;
        }
    }
    NaiveBayesModel::from_counts(vocab.clone(), alpha, class_counts, token_counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnnotatedUtterance;
    use crate::features::VocabConfig;
    use crate::label::SentimentLabel::{self, *};

    fn corpus(rows: &[(&str, SentimentLabel)]) -> AnnotatedCorpus {
        rows.iter()
            .map(|(t, l)| AnnotatedUtterance::human(*t, *l).unwrap())
            .collect()
    }

    #[test]
    fn hand_computed_likelihoods() {
        let c = corpus(&[("good good", Positive), ("bad", Negative)]);
        let v = Vocabulary::build(&c, VocabConfig::default()).unwrap();
        let m = train_naive_bayes(&c, &v, 1.0).unwrap();
        // |V| = 2; P(good|+) = (2+1)/(2+2) = 3/4, P(good|-) = (0+1)/(1+2) = 1/3
        let pos = m.log_likelihood("good", Positive.index()).unwrap();
        let neg = m.log_likelihood("good", Negative.index()).unwrap();
        assert!((pos - (0.75f64).ln()).abs() < 1e-12);
        assert!((neg - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!(pos > neg);

        // posterior for "good": 1/2 * 3/4 vs 1/2 * 1/3
        let p = m.predict("good");
        assert_eq!(p.label, Positive);
        let expected = 0.75 / (0.75 + 1.0 / 3.0);
        assert!((p.distribution[Positive.index()] - expected).abs() < 1e-12);
    }

    #[test]
    fn priors_sum_to_one() {
        let c = corpus(&[("a", Positive), ("b", Negative), ("c", Negative), ("d", Neutral)]);
        let v = Vocabulary::build(&c, VocabConfig::default()).unwrap();
        let m = train_naive_bayes(&c, &v, 0.5).unwrap();
        let s: f64 = m.log_priors().iter().flatten().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(m.log_priors()[VeryPositive.index()].is_none());
        let p = m.predict("");
        assert_eq!(p.label, Negative);
        assert_eq!(p.distribution[VeryPositive.index()], 0.0);
    }

    #[test]
    fn bad_parameters() {
        let c = corpus(&[("good", Positive), ("bad", Negative)]);
        let v = Vocabulary::build(&c, VocabConfig::default()).unwrap();
        assert!(matches!(
            train_naive_bayes(&c, &v, 0.0),
            Err(ModelError::InvalidParameter(_))
        ));
        let single = corpus(&[("good", Positive)]);
        assert!(matches!(
            train_naive_bayes(&single, &v, 1.0),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn scaling_prior_counts_keeps_argmax() {
        let c = corpus(&[
            ("good fun", Positive),
            ("bad sad", Negative),
            ("sad day", Negative),
            ("the day", Neutral),
        ]);
        let v = Vocabulary::build(&c, VocabConfig::default()).unwrap();
        let m = train_naive_bayes(&c, &v, 1.0).unwrap();
        for k in [2u64, 7, 1000] {
            let scaled = NaiveBayesModel::from_counts(
                v.clone(),
                1.0,
                m.class_counts().map(|n| n * k),
                m.token_counts().to_vec(),
            )
            .unwrap();
            for text in ["good", "sad", "day", "fun day", "", "unknown words"] {
                assert_eq!(m.predict(text).label, scaled.predict(text).label, "{text}");
            }
        }
    }
}
