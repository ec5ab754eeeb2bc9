//! Random forest of Gini-split decision trees over bag-of-words counts.
//!
//! Each tree sees a bootstrap sample drawn from a ChaCha stream keyed by
//! `(seed, tree_index)`, so training is independent of thread scheduling.
//! Splits test `count(feature) >= threshold`, thresholds being midpoints
//! between observed counts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, Prediction};
use crate::corpus::AnnotatedCorpus;
use crate::features::{BowVector, Vocabulary};
use crate::label::NUM_CLASSES;

pub const DEFAULT_TREES: usize = 25;

const MIN_GAIN: f64 = 1e-12;

/// How many features to try per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// `ceil(sqrt(|V|))`
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, vocab_len: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (vocab_len as f64).sqrt().ceil() as usize,
            MaxFeatures::All => vocab_len,
            MaxFeatures::Fixed(n) => n.min(vocab_len),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            max_features: MaxFeatures::Sqrt,
            min_leaf: 1,
            bootstrap: true,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        /// Taken when `count < threshold`.
        left: u32,
        right: u32,
    },
    Leaf {
        counts: [u32; NUM_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaf_for(&self, x: &BowVector) -> &[u32; NUM_CLASSES] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.count(*feature) as f64 >= *threshold {
                        *right as usize
                    } else {
                        *left as usize
                    };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Normalized leaf histogram.
    pub fn distribution(&self, x: &BowVector) -> [f64; NUM_CLASSES] {
        let counts = self.leaf_for(x);
        let total: u32 = counts.iter().sum();
        counts.map(|c| c as f64 / total as f64)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    fn check(&self, vocab_len: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => {
                    if *feature as usize >= vocab_len || !threshold.is_finite() {
                        return Err(format!("node {i}: bad split"));
                    }
                    // children are always stored after their parent
                    for c in [*left, *right] {
                        if c as usize <= i || c as usize >= self.nodes.len() {
                            return Err(format!("node {i}: child {c} out of order"));
                        }
                    }
                }
                Node::Leaf { counts } => {
                    if counts.iter().sum::<u32>() == 0 {
                        return Err(format!("node {i}: empty leaf"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Training view: feature rows and class indices.
struct TrainingSet<'a> {
    rows: &'a [BowVector],
    labels: &'a [u8],
}

fn gini_weighted(counts: &[u32; NUM_CLASSES], n: u32) -> f64 {
    // n * gini(counts) = n - sum(c^2) / n
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    n as f64 - sq / n as f64
}

struct SplitCandidate {
    feature: u32,
    threshold: f64,
    /// Weighted child impurity; lower is better.
    impurity: f64,
}

struct TreeBuilder<'a> {
    data: &'a TrainingSet<'a>,
    params: ForestParams,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn histogram(&self, samples: &[usize]) -> [u32; NUM_CLASSES] {
        let mut h = [0u32; NUM_CLASSES];
        for &s in samples {
            h[self.data.labels[s] as usize] += 1;
        }
        h
    }

    /// Best threshold on one feature, or `None` if the feature is constant
    /// on the node. The inner option is `None` when no threshold respects
    /// `min_leaf`.
    ///
    /// `nonzero` holds the node's `(count, label)` pairs with a non-zero
    /// count for this feature, sorted; every other sample has count 0.
    fn best_threshold(
        &self,
        feature: u32,
        nonzero: &[(u32, u8)],
        hist: &[u32; NUM_CLASSES],
        n: u32,
    ) -> Option<Option<SplitCandidate>> {
        let zeros = n - nonzero.len() as u32;
        let (first, last) = (nonzero.first()?.0, nonzero.last()?.0);
        if zeros == 0 && first == last {
            return None;
        }

        let min_leaf = self.params.min_leaf as u32;
        let mut left = *hist;
        for &(_, l) in nonzero {
            left[l as usize] -= 1;
        }
        let mut best: Option<SplitCandidate> = None;
        let mut consider = |left: &[u32; NUM_CLASSES], nl: u32, v: u32, next: u32| {
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                return;
            }
            let mut right = *hist;
            for c in 0..NUM_CLASSES {
                right[c] -= left[c];
            }
            let impurity = gini_weighted(left, nl) + gini_weighted(&right, nr);
            if best.as_ref().is_none_or(|b| impurity < b.impurity - MIN_GAIN) {
                best = Some(SplitCandidate {
                    feature,
                    threshold: (v as f64 + next as f64) / 2.0,
                    impurity,
                });
            }
        };
        if zeros > 0 {
            consider(&left, zeros, 0, first);
        }
        let mut nl = zeros;
        for i in 0..nonzero.len() - 1 {
            left[nonzero[i].1 as usize] += 1;
            nl += 1;
            let (v, next) = (nonzero[i].0, nonzero[i + 1].0);
            if v != next {
                consider(&left, nl, v, next);
            }
        }
        Some(best)
    }

    fn choose_split(
        &mut self,
        samples: &[usize],
        hist: &[u32; NUM_CLASSES],
        parent_impurity: f64,
    ) -> Option<SplitCandidate> {
        // (feature, count, label) for every non-zero cell in the node
        let mut cells: Vec<(u32, u32, u8)> = samples
            .iter()
            .flat_map(|&s| {
                let label = self.data.labels[s];
                self.data.rows[s].entries().iter().map(move |&(f, c)| (f, c, label))
            })
            .collect();
        cells.sort_unstable();
        let mut spans: Vec<(u32, usize, usize)> = Vec::new();
        for (i, &(f, _, _)) in cells.iter().enumerate() {
            match spans.last_mut() {
                Some((g, _, end)) if *g == f => *end = i + 1,
                _ => spans.push((f, i, i + 1)),
            }
        }
        let mut features: Vec<u32> = spans.iter().map(|&(f, _, _)| f).collect();
        features.shuffle(&mut self.rng);

        let n = samples.len() as u32;
        let mut nonzero: Vec<(u32, u8)> = Vec::new();
        // Constant features do not count against the budget, and the search
        // continues past it until some split actually reduces impurity.
        let mut visited = 0usize;
        let mut best: Option<SplitCandidate> = None;
        for f in features {
            let improves = best
                .as_ref()
                .is_some_and(|b| b.impurity < parent_impurity - MIN_GAIN);
            if visited >= self.max_features && improves {
                break;
            }
            let at = spans.binary_search_by_key(&f, |&(g, _, _)| g).expect("feature has a span");
            let (_, start, end) = spans[at];
            nonzero.clear();
            nonzero.extend(cells[start..end].iter().map(|&(_, c, l)| (c, l)));
            let Some(candidate) = self.best_threshold(f, &nonzero, hist, n) else {
                continue;
            };
            visited += 1;
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity - MIN_GAIN) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.impurity < parent_impurity - MIN_GAIN)
    }

    fn build(mut self, samples: Vec<usize>) -> DecisionTree {
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        self.nodes.push(Node::Leaf {
            counts: [0; NUM_CLASSES],
        });
        while let Some((slot, samples, depth)) = stack.pop() {
            let hist = self.histogram(&samples);
            let n = samples.len() as u32;
            let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
            let too_small = samples.len() < 2 * self.params.min_leaf;
            let too_deep = self.params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || too_small || too_deep {
                None
            } else {
                self.choose_split(&samples, &hist, gini_weighted(&hist, n))
            };
            let Some(split) = split else {
                self.nodes[slot] = Node::Leaf { counts: hist };
                continue;
            };
            let (right, left): (Vec<usize>, Vec<usize>) = samples
                .into_iter()
                .partition(|&s| self.data.rows[s].count(split.feature) as f64 >= split.threshold);
            let left_slot = self.nodes.len();
            let right_slot = left_slot + 1;
            self.nodes.push(Node::Leaf {
                counts: [0; NUM_CLASSES],
            });
            self.nodes.push(Node::Leaf {
                counts: [0; NUM_CLASSES],
            });
            self.nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: left_slot as u32,
                right: right_slot as u32,
            };
            stack.push((right_slot, right, depth + 1));
            stack.push((left_slot, left, depth + 1));
        }
        DecisionTree { nodes: self.nodes }
    }
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    vocab: Vocabulary,
    trees: Vec<DecisionTree>,
    seed: u64,
    params: ForestParams,
}

impl RandomForestModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Mean of the per-tree normalized leaf histograms.
    pub fn predict_vector(&self, x: &BowVector) -> Prediction {
        let mut dist = [0.0; NUM_CLASSES];
        for t in &self.trees {
            for (d, p) in dist.iter_mut().zip(t.distribution(x)) {
                *d += p;
            }
        }
        let n = self.trees.len() as f64;
        Prediction::from_distribution(dist.map(|d| d / n))
    }

    pub fn predict(&self, text: &str) -> Prediction {
        self.predict_vector(&self.vocab.vectorize(text))
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.trees.is_empty() {
            return Err(ModelError::Corrupt("forest has no trees".into()));
        }
        for t in &self.trees {
            t.check(self.vocab.len()).map_err(ModelError::Corrupt)?;
        }
        Ok(())
    }
}

pub fn train_random_forest(
    train: &AnnotatedCorpus,
    vocab: &Vocabulary,
    n_trees: usize,
    seed: u64,
    params: ForestParams,
) -> Result<RandomForestModel, ModelError> {
    if n_trees == 0 {
        return Err(ModelError::InvalidParameter("n_trees must be at least 1".into()));
    }
    if params.min_leaf == 0 {
        return Err(ModelError::InvalidParameter("min_leaf must be at least 1".into()));
    }
    if vocab.is_empty() {
        return Err(ModelError::EmptyVocabulary);
    }
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if train.distinct_labels() < 2 {
        return Err(ModelError::SingleClass);
    }

    let rows: Vec<BowVector> = train.iter().map(|r| vocab.vectorize(&r.text)).collect();
    let labels: Vec<u8> = train.iter().map(|r| r.label.index() as u8).collect();
    let data = TrainingSet {
        rows: &rows,
        labels: &labels,
    };
    let max_features = params.max_features.resolve(vocab.len());
    let n = rows.len();

    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder {
                data: &data,
                params,
                max_features,
                rng,
                nodes: Vec::new(),
            }
            .build(samples)
        })
        .collect();

    Ok(RandomForestModel {
        vocab: vocab.clone(),
        trees,
        seed,
        params,
    })
}
