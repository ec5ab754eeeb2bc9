//! Candidate selection for annotation and the overlapping annotator splits.

use std::collections::{HashSet, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;
use crate::features::tokenize;

/// Pick `n_lexical` utterances containing an opinion word plus `n_random`
/// uniformly drawn others. The pool is de-duplicated first; the output has
/// the lexical picks first, then the random ones.
pub fn sample_candidate_utterances(
    pool: &[String],
    opinion_lexicon: &HashSet<String>,
    n_lexical: usize,
    n_random: usize,
    seed: u64,
) -> Result<Vec<String>, CorpusError> {
    let mut seen = HashSet::new();
    let unique: Vec<&String> = pool.iter().filter(|s| seen.insert(s.as_str())).collect();
    if n_lexical + n_random > unique.len() {
        return Err(CorpusError::Insufficient {
            requested: n_lexical + n_random,
            available: unique.len(),
        });
    }

    let (mut qualifying, mut rest): (Vec<usize>, Vec<usize>) = (0..unique.len())
        .partition(|&i| tokenize(unique[i]).iter().any(|t| opinion_lexicon.contains(t)));
    if qualifying.len() < n_lexical {
        return Err(CorpusError::Insufficient {
            requested: n_lexical,
            available: qualifying.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    qualifying.shuffle(&mut rng);
    rest.extend_from_slice(&qualifying[n_lexical..]);
    rest.sort_unstable();
    rest.shuffle(&mut rng);

    Ok(qualifying[..n_lexical]
        .iter()
        .chain(&rest[..n_random])
        .map(|&i| unique[i].clone())
        .collect())
}

/// Work handed to one annotator: a unique slice plus a shared slice
/// borrowed from another annotator's part, used for agreement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatorAssignment<T> {
    pub annotator: usize,
    pub unique: Vec<T>,
    /// Index of the annotator whose part the shared items come from.
    pub shared_with: usize,
    pub shared: Vec<T>,
}

/// Split `items` into `n_annotators` equal parts; annotator `i` also gets the
/// first `overlap` items of part `(i + 1) mod n`. A remainder that does not
/// divide evenly is left out, matching equal-size parts.
pub fn overlap_splits<T: Clone>(
    items: &[T],
    n_annotators: usize,
    overlap: usize,
) -> Result<Vec<AnnotatorAssignment<T>>, CorpusError> {
    if n_annotators < 2 {
        return Err(CorpusError::InvalidRecord(
            "overlap splits need at least 2 annotators".into(),
        ));
    }
    let part = items.len() / n_annotators;
    if overlap > part {
        return Err(CorpusError::Insufficient {
            requested: overlap,
            available: part,
        });
    }
    let parts: Vec<&[T]> = items.chunks(part.max(1)).take(n_annotators).collect();
    Ok((0..n_annotators)
        .map(|i| {
            let next = (i + 1) % n_annotators;
            AnnotatorAssignment {
                annotator: i,
                unique: parts.get(i).map(|p| p.to_vec()).unwrap_or_default(),
                shared_with: next,
                shared: parts
                    .get(next)
                    .map(|p| p[..overlap].to_vec())
                    .unwrap_or_default(),
            }
        })
        .collect())
}

/// Distinct opinion-lexicon hits in `text`, for reporting why it qualified.
pub fn opinion_hits(text: &str, opinion_lexicon: &HashSet<String>) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| opinion_lexicon.contains(t))
        .collect()
}
