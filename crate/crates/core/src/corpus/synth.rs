//! Seeded synthetic corpora.
//!
//! [`signal_corpus`] produces records whose class is a deterministic function
//! of one signal token buried in noise, which is what the classifier sanity
//! checks need. [`dialogue_corpus`] produces socialbot-style user utterances
//! with a neutral-heavy class mix, as a stand-in for real interaction logs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedCorpus, AnnotatedUtterance, Source};
use crate::label::{SentimentLabel, NUM_CLASSES};

#[derive(Debug, Clone)]
pub struct SignalCorpusSpec {
    pub n_records: usize,
    pub signal_tokens_per_class: usize,
    pub noise_vocab: usize,
    pub noise_per_record: std::ops::RangeInclusive<usize>,
    /// Relative class frequencies, most negative first.
    pub class_weights: [f64; NUM_CLASSES],
}

impl Default for SignalCorpusSpec {
    fn default() -> Self {
        Self {
            n_records: 1500,
            signal_tokens_per_class: 5,
            noise_vocab: 300,
            noise_per_record: 2..=8,
            class_weights: [1.0; NUM_CLASSES],
        }
    }
}

/// The signal token for `class`, number `k`.
pub fn signal_token(class: SentimentLabel, k: usize) -> String {
    let stem = ["vneg", "neg", "neu", "pos", "vpos"][class.index()];
    format!("{stem}sig{k}")
}

fn pick_class(rng: &mut ChaCha8Rng, weights: &[f64; NUM_CLASSES]) -> SentimentLabel {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return SentimentLabel::ALL[i];
        }
        x -= w;
    }
    SentimentLabel::ALL[NUM_CLASSES - 1]
}

pub fn signal_corpus(spec: &SignalCorpusSpec, seed: u64) -> AnnotatedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<String> = (0..spec.noise_vocab).map(|i| format!("noise{i}")).collect();
    (0..spec.n_records)
        .map(|_| {
            let label = pick_class(&mut rng, &spec.class_weights);
            let k = rng.random_range(0..spec.signal_tokens_per_class);
            let n_noise = rng.random_range(spec.noise_per_record.clone());
            let mut words: Vec<String> = (0..n_noise)
                .map(|_| noise.choose(&mut rng).expect("noise vocabulary").clone())
                .collect();
            words.push(signal_token(label, k));
            words.shuffle(&mut rng);
            AnnotatedUtterance {
                text: words.join(" "),
                label,
                source: Source::HumanAnnotated,
                annotator: None,
                ambiguous: None,
            }
        })
        .collect()
}

/// Class mix of a 350-utterance held-out socialbot sample: 10/22/169/122/27.
pub const DIALOGUE_CLASS_WEIGHTS: [f64; NUM_CLASSES] = [10.0, 22.0, 169.0, 122.0, 27.0];

const TOPICS: &[&str] = &[
    "movies", "music", "football", "harry potter", "the news", "cats", "dogs", "cooking",
    "travel", "books", "video games", "the weather", "science", "space", "history", "tennis",
];

const NEUTRAL: &[&str] = &[
    "let's talk about {t}",
    "what do you know about {t}",
    "tell me about {t}",
    "can we chat about {t}",
    "i watched something about {t} yesterday",
    "do you know anything about {t}",
    "what is your opinion on {t}",
    "yes",
    "no thanks",
    "okay",
    "what time is it",
    "who are you",
];

const POSITIVE: &[&str] = &[
    "i like {t}",
    "{t} is good",
    "i enjoy {t}",
    "that is nice",
    "cool i like that",
    "{t} is fun",
    "thanks that was helpful",
    "sounds good",
];

const VERY_POSITIVE: &[&str] = &[
    "i love {t}",
    "{t} is amazing",
    "that is awesome",
    "you are wonderful",
    "i absolutely adore {t}",
    "this is the best conversation ever",
];

const NEGATIVE: &[&str] = &[
    "i don't like {t}",
    "{t} is boring",
    "that is bad",
    "i am sad",
    "i'm tired of {t}",
    "that was not helpful",
];

const VERY_NEGATIVE: &[&str] = &[
    "i hate {t}",
    "{t} is terrible",
    "you are stupid",
    "this is awful",
    "that is the worst answer ever",
    "i am so angry",
];

fn templates(label: SentimentLabel) -> &'static [&'static str] {
    match label {
        SentimentLabel::VeryNegative => VERY_NEGATIVE,
        SentimentLabel::Negative => NEGATIVE,
        SentimentLabel::Neutral => NEUTRAL,
        SentimentLabel::Positive => POSITIVE,
        SentimentLabel::VeryPositive => VERY_POSITIVE,
    }
}

/// `n` template utterances with the held-out class mix. The pre-split
/// utterance count is a parameter rather than a fixed constant.
pub fn dialogue_corpus(n: usize, seed: u64) -> AnnotatedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let label = pick_class(&mut rng, &DIALOGUE_CLASS_WEIGHTS);
            let template = templates(label).choose(&mut rng).expect("templates");
            let topic = TOPICS.choose(&mut rng).expect("topics");
            AnnotatedUtterance {
                text: template.replace("{t}", topic),
                label,
                source: Source::HumanAnnotated,
                annotator: Some(format!("synth{}", rng.random_range(0..7))),
                ambiguous: None,
            }
        })
        .collect()
}
