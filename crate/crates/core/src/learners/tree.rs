//! C4.5-style decision trees over binary features, and decision stumps.
//!
//! Splits maximise gain ratio among features whose information gain is at
//! least the average positive gain. When no split has positive gain but the
//! node is still impure, the tree keeps splitting on the first admissible
//! feature so the grown tree reproduces the training data; error-based
//! pruning then removes what does not pay for itself. Subtree raising is not
//! implemented.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_width, laplace, Classifier, SenseDistribution, TrainingData};
use crate::error::{Error, Result};
use crate::featurize::{BitVector, FeatureVector};

const GAIN_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Confidence factor for pessimistic error estimates.
    pub confidence: f64,
    /// Minimum number of training instances on each side of a split.
    pub min_leaf: usize,
    pub prune: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            confidence: 0.25,
            min_leaf: 2,
            prune: true,
        }
    }
}

impl TreeConfig {
    pub fn unpruned() -> Self {
        TreeConfig {
            prune: false,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "confidence factor must be in (0, 0.5], got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<u64>,
    },
    Split {
        feature: usize,
        counts: Vec<u64>,
        absent: Box<Node>,
        present: Box<Node>,
    },
}

impl Node {
    pub fn counts(&self) -> &[u64] {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { absent, present, .. } => 1 + absent.depth().max(present.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { absent, present, .. } => absent.leaf_count() + present.leaf_count(),
        }
    }

    fn leaf_for(&self, bits: &BitVector) -> &[u64] {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    absent,
                    present,
                    ..
                } => node = if bits.get(*feature) { present } else { absent },
            }
        }
    }

    fn training_errors(&self) -> f64 {
        match self {
            Node::Leaf { counts } => leaf_errors(counts),
            Node::Split { absent, present, .. } => absent.training_errors() + present.training_errors(),
        }
    }

    fn estimated_errors(&self, confidence: f64) -> f64 {
        match self {
            Node::Leaf { counts } => {
                let e = leaf_errors(counts);
                e + add_errors(total(counts), e, confidence)
            }
            Node::Split { absent, present, .. } => {
                absent.estimated_errors(confidence) + present.estimated_errors(confidence)
            }
        }
    }
}

fn total(counts: &[u64]) -> f64 {
    counts.iter().sum::<u64>() as f64
}

fn leaf_errors(counts: &[u64]) -> f64 {
    total(counts) - counts.iter().copied().max().unwrap_or(0) as f64
}

fn entropy(counts: &[u64]) -> f64 {
    let n = total(counts);
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Extra errors to add to `errors` observed among `n` cases so the total is
/// the upper confidence limit at level `confidence` (normal approximation to
/// the binomial, with the exact bound for zero errors).
pub fn add_errors(n: f64, errors: f64, confidence: f64) -> f64 {
    if confidence > 0.5 || n <= 0.0 {
        return 0.0;
    }
    if errors < 1.0 {
        let base = n * (1.0 - confidence.powf(1.0 / n));
        if errors == 0.0 {
            return base;
        }
        return base + errors * (add_errors(n, 1.0, confidence) - base);
    }
    if errors + 0.5 >= n {
        return (n - errors).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence);
    let f = (errors + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - errors
}

#[derive(Debug, Clone, Copy)]
struct SplitStat {
    feature: usize,
    gain: f64,
    ratio: f64,
}

/// Gain and gain ratio of every admissible split of the rows in `idx`.
fn split_stats(data: &TrainingData, idx: &[usize], excluded: &[bool], min_leaf: usize) -> Vec<SplitStat> {
    let n_senses = data.senses().len();
    let mut parent = vec![0u64; n_senses];
    let mut present = vec![0u64; data.width() * n_senses];
    for &i in idx {
        let label = data.labels()[i];
        parent[label] += 1;
        for f in data.rows()[i].ones() {
            present[f * n_senses + label] += 1;
        }
    }
    let n = idx.len() as f64;
    let info = entropy(&parent);
    let mut absent = vec![0u64; n_senses];
    let mut stats = Vec::new();
    for f in 0..data.width() {
        if excluded[f] {
            continue;
        }
        let with = &present[f * n_senses..(f + 1) * n_senses];
        let n1 = with.iter().sum::<u64>() as usize;
        let n0 = idx.len() - n1;
        if n1 < min_leaf || n0 < min_leaf {
            continue;
        }
        for s in 0..n_senses {
            absent[s] = parent[s] - with[s];
        }
        let (p1, p0) = (n1 as f64 / n, n0 as f64 / n);
        let gain = info - p1 * entropy(with) - p0 * entropy(&absent);
        let split_info = -(p1 * p1.log2() + p0 * p0.log2());
        stats.push(SplitStat {
            feature: f,
            gain,
            ratio: if split_info > 0.0 { gain / split_info } else { 0.0 },
        });
    }
    stats
}

/// Best gain ratio among positive-gain splits whose gain reaches the average;
/// ties go to the lower feature index.
fn best_positive(stats: &[SplitStat]) -> Option<usize> {
    let positive: Vec<&SplitStat> = stats.iter().filter(|s| s.gain > GAIN_EPSILON).collect();
    if positive.is_empty() {
        return None;
    }
    let avg = positive.iter().map(|s| s.gain).sum::<f64>() / positive.len() as f64;
    let mut best: Option<&SplitStat> = None;
    for s in positive.into_iter().filter(|s| s.gain >= avg - 1e-3) {
        if best.is_none_or(|b| s.ratio > b.ratio) {
            best = Some(s);
        }
    }
    best.map(|s| s.feature)
}

fn class_counts(data: &TrainingData, idx: &[usize]) -> Vec<u64> {
    let mut c = vec![0u64; data.senses().len()];
    for &i in idx {
        c[data.labels()[i]] += 1;
    }
    c
}

fn grow(data: &TrainingData, idx: &[usize], on_path: &mut [bool], min_leaf: usize) -> Node {
    let counts = class_counts(data, idx);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || idx.len() < 2 * min_leaf {
        return Node::Leaf { counts };
    }
    let stats = split_stats(data, idx, on_path, min_leaf);
    let Some(feature) = best_positive(&stats).or_else(|| stats.first().map(|s| s.feature)) else {
        return Node::Leaf { counts };
    };
    let (with, without): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data.rows()[i].get(feature));
    on_path[feature] = true;
    let present = grow(data, &with, on_path, min_leaf);
    let absent = grow(data, &without, on_path, min_leaf);
    on_path[feature] = false;
    Node::Split {
        feature,
        counts,
        absent: Box::new(absent),
        present: Box::new(present),
    }
}

/// Bottom-up: a subtree becomes a leaf when it makes no fewer training errors
/// than the leaf would, or when the leaf's pessimistic error estimate is not
/// worse than the subtree's (within 0.1 errors).
fn prune(node: Node, confidence: f64) -> Node {
    match node {
        Node::Leaf { .. } => node,
        Node::Split {
            feature,
            counts,
            absent,
            present,
        } => {
            let node = Node::Split {
                feature,
                counts,
                absent: Box::new(prune(*absent, confidence)),
                present: Box::new(prune(*present, confidence)),
            };
            let counts = node.counts();
            let leaf_err = leaf_errors(counts);
            if node.training_errors() >= leaf_err - 1e-3 {
                return Node::Leaf {
                    counts: counts.to_vec(),
                };
            }
            let as_leaf = leaf_err + add_errors(total(counts), leaf_err, confidence);
            if as_leaf <= node.estimated_errors(confidence) + 0.1 {
                return Node::Leaf {
                    counts: counts.to_vec(),
                };
            }
            node
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub senses: Vec<String>,
    pub width: usize,
    pub root: Node,
    pub config: TreeConfig,
}

impl DecisionTreeModel {
    pub fn fit(data: &TrainingData, config: &TreeConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut on_path = vec![false; data.width()];
        let mut root = grow(data, &idx, &mut on_path, config.min_leaf.max(1));
        if config.prune {
            root = prune(root, config.confidence);
        }
        Ok(DecisionTreeModel {
            senses: data.senses().to_vec(),
            width: data.width(),
            root,
            config: config.clone(),
        })
    }
}

impl Classifier for DecisionTreeModel {
    /// Laplace-corrected class counts of the leaf the vector reaches.
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        check_width(self.width, bits)?;
        Ok(laplace(&self.senses, self.root.leaf_for(bits)))
    }
}

pub fn train_decision_tree(train: &[FeatureVector], config: &TreeConfig) -> Result<DecisionTreeModel> {
    DecisionTreeModel::fit(&TrainingData::from_vectors(train)?, config)
}

pub fn tree_predict(m: &DecisionTreeModel, v: &FeatureVector) -> Result<SenseDistribution> {
    m.predict(&v.bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpSplit {
    pub feature: usize,
    pub absent: Vec<u64>,
    pub present: Vec<u64>,
}

/// A tree cut off after the root split. Without a positive-gain split it
/// predicts the training class counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStumpModel {
    pub senses: Vec<String>,
    pub width: usize,
    pub split: Option<StumpSplit>,
    pub counts: Vec<u64>,
}

impl DecisionStumpModel {
    pub fn fit(data: &TrainingData, config: &TreeConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let idx: Vec<usize> = (0..data.len()).collect();
        let counts = class_counts(data, &idx);
        let stats = split_stats(data, &idx, &vec![false; data.width()], config.min_leaf.max(1));
        let split = best_positive(&stats).map(|feature| {
            let (with, without): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data.rows()[i].get(feature));
            StumpSplit {
                feature,
                absent: class_counts(data, &without),
                present: class_counts(data, &with),
            }
        });
        Ok(DecisionStumpModel {
            senses: data.senses().to_vec(),
            width: data.width(),
            split,
            counts,
        })
    }
}

impl Classifier for DecisionStumpModel {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        check_width(self.width, bits)?;
        let counts = match &self.split {
            Some(s) if bits.get(s.feature) => &s.present,
            Some(s) => &s.absent,
            None => &self.counts,
        };
        Ok(laplace(&self.senses, counts))
    }
}

pub fn train_decision_stump(train: &[FeatureVector]) -> Result<DecisionStumpModel> {
    DecisionStumpModel::fit(&TrainingData::from_vectors(train)?, &TreeConfig::default())
}
