//! Sentiment-aware response bucket for a multi-bot socialbot.
//!
//! The crate covers the whole offline and online pipeline: annotated corpora
//! and agreement, bag-of-words features, four sentiment classifiers and an
//! evaluation harness, the bucket that gates and prefixes bot responses, stub
//! bots, and the chat service that runs the A/B arms.

pub mod bots;
pub mod bucket;
pub mod classifiers;
pub mod corpus;
pub mod features;
pub mod eval;
mod fingerprint;
pub mod label;
pub mod service;

pub use classifiers::{Prediction, SentimentClassifier, TrainedModel};
pub use corpus::{AnnotatedCorpus, AnnotatedUtterance, Source};
pub use features::{tokenize, BowVector, Vocabulary};
pub use label::{AnnotationLabel, SentimentLabel};
