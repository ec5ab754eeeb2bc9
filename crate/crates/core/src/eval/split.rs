use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{AnnotatedCorpus, Source};
use crate::label::{SentimentLabel, NUM_CLASSES};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Records that go to train, given `n` candidates. Half-up rounding so that a
/// class never drifts more than half a record from the exact share.
fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) + 0.5).floor() as usize
}

/// Split a corpus into `(train, test)`.
///
/// Lexicon-word samples always go to train. Both halves keep the corpus'
/// record order.
pub fn split(
    corpus: &AnnotatedCorpus,
    spec: &SplitSpec,
) -> Result<(AnnotatedCorpus, AnnotatedCorpus), EvalError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(EvalError::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let records = corpus.records();
    let mut in_train = vec![false; records.len()];
    let human: Vec<usize> = (0..records.len())
        .filter(|&i| {
            let lexical = records[i].source == Source::LexiconWord;
            in_train[i] = lexical;
            !lexical
        })
        .collect();

    if spec.stratified {
        let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
        for &i in &human {
            by_class[records[i].label.index()].push(i);
        }
        for (c, mut idx) in by_class.into_iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            if idx.len() < 2 {
                return Err(EvalError::TooFewRecords {
                    label: SentimentLabel::from_index(c).expect("class index"),
                    count: idx.len(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            idx.shuffle(&mut rng);
            let k = train_count(idx.len(), spec.train_fraction).clamp(1, idx.len() - 1);
            for &i in &idx[..k] {
                in_train[i] = true;
            }
        }
    } else {
        let mut idx = human;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        idx.shuffle(&mut rng);
        let k = train_count(idx.len(), spec.train_fraction).min(idx.len());
        for &i in &idx[..k] {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = records
        .iter()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r.clone()).collect(),
        test.into_iter().map(|(r, _)| r.clone()).collect(),
    ))
}
