//! Classifiers over binary feature vectors.
//!
//! Every model predicts a [`SenseDistribution`] so that heterogeneous
//! classifiers can be combined by voting. Argmax ties are always broken the
//! same way: highest score, then lexicographically smallest sense.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::BaggedEnsemble;
use crate::error::{Error, Result};
use crate::featurize::{BitVector, FeatureVector};

mod knn;
mod naive_bayes;
mod tree;

pub use knn::{knn_predict, train_knn, KnnModel};
pub use naive_bayes::{nb_predict, train_naive_bayes, NaiveBayesModel};
pub use tree::{
    add_errors, train_decision_stump, train_decision_tree, tree_predict, DecisionStumpModel, DecisionTreeModel, Node,
    TreeConfig,
};

/// Non-negative scores per sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SenseDistribution {
    scores: BTreeMap<String, f64>,
}

impl SenseDistribution {
    pub fn new(scores: BTreeMap<String, f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidParameter(
                "a sense distribution needs at least one sense".into(),
            ));
        }
        if let Some((s, v)) = scores.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("score for {s} is {v}")));
        }
        Ok(SenseDistribution { scores })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(s, v)| (s.into(), v)).collect())
    }

    /// All mass on one sense.
    pub fn point(sense: impl Into<String>) -> Self {
        SenseDistribution {
            scores: BTreeMap::from([(sense.into(), 1.0)]),
        }
    }

    pub fn get(&self, sense: &str) -> f64 {
        self.scores.get(sense).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(s, &v)| (s.as_str(), v))
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn contains(&self, sense: &str) -> bool {
        self.scores.contains_key(sense)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.scores.values().sum()
    }

    /// Scores rescaled to sum to one; an all-zero distribution becomes uniform.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        let n = self.scores.len() as f64;
        SenseDistribution {
            scores: self
                .scores
                .iter()
                .map(|(s, &v)| (s.clone(), if total > 0.0 { v / total } else { 1.0 / n }))
                .collect(),
        }
    }

    /// Highest score; ties go to the lexicographically smallest sense.
    pub fn argmax(&self) -> &str {
        let mut best: Option<(&str, f64)> = None;
        for (s, v) in self.iter() {
            // iteration is in lexicographic order, so only a strictly larger
            // score may replace the current best
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s, v));
            }
        }
        best.expect("distributions are never empty").0
    }
}

/// Labelled vectors with senses mapped to dense indices (sorted sense order).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    senses: Vec<String>,
    rows: Vec<BitVector>,
    labels: Vec<usize>,
    width: usize,
}

impl TrainingData {
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyTrainingSet)?;
        let width = first.len();
        let mut senses: Vec<String> = Vec::new();
        for v in vectors {
            let label = v
                .label
                .as_ref()
                .ok_or_else(|| Error::Unlabeled(v.instance_id.clone()))?;
            if v.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    found: v.len(),
                });
            }
            senses.push(label.clone());
        }
        senses.sort();
        senses.dedup();
        let labels = vectors
            .iter()
            .map(|v| {
                senses
                    .binary_search(v.label.as_ref().expect("checked above"))
                    .expect("sense collected")
            })
            .collect();
        Ok(TrainingData {
            senses,
            rows: vectors.iter().map(|v| v.bits.clone()).collect(),
            labels,
            width,
        })
    }

    /// Rows at `indices` (repeats allowed), keeping the full sense inventory.
    pub fn resample(&self, indices: &[usize]) -> TrainingData {
        TrainingData {
            senses: self.senses.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            width: self.width,
        }
    }

    pub fn senses(&self) -> &[String] {
        &self.senses
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.senses.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Turns per-sense counts into a distribution with add-one smoothing.
pub(crate) fn laplace(senses: &[String], counts: &[u64]) -> SenseDistribution {
    let n: u64 = counts.iter().sum();
    let denom = (n + senses.len() as u64) as f64;
    SenseDistribution {
        scores: senses
            .iter()
            .zip(counts)
            .map(|(s, &c)| (s.clone(), (c + 1) as f64 / denom))
            .collect(),
    }
}

pub(crate) fn check_width(expected: usize, bits: &BitVector) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: bits.len(),
        });
    }
    Ok(())
}

/// Training label frequencies.
pub fn majority_baseline(train: &[FeatureVector]) -> Result<SenseDistribution> {
    Ok(MajorityModel::fit(&TrainingData::from_vectors(train)?).distribution)
}

/// Predicts the training label frequencies regardless of input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityModel {
    pub distribution: SenseDistribution,
    pub width: usize,
}

impl MajorityModel {
    pub fn fit(data: &TrainingData) -> Self {
        let n = data.len() as f64;
        let scores = data
            .senses()
            .iter()
            .zip(data.class_counts())
            .map(|(s, c)| (s.clone(), c as f64 / n))
            .collect();
        MajorityModel {
            distribution: SenseDistribution { scores },
            width: data.width(),
        }
    }
}

pub trait Classifier {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution>;
}

impl Classifier for MajorityModel {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        check_width(self.width, bits)?;
        Ok(self.distribution.clone())
    }
}

/// Learning algorithm and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Learner {
    NaiveBayes,
    DecisionTree(TreeConfig),
    DecisionStump(TreeConfig),
    Knn { k: usize },
    Majority,
}

impl Learner {
    pub fn tree() -> Self {
        Learner::DecisionTree(TreeConfig::default())
    }

    pub fn stump() -> Self {
        Learner::DecisionStump(TreeConfig::default())
    }

    pub fn train(&self, data: &TrainingData) -> Result<Model> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(match self {
            Learner::NaiveBayes => Model::NaiveBayes(NaiveBayesModel::fit(data)),
            Learner::DecisionTree(cfg) => Model::DecisionTree(DecisionTreeModel::fit(data, cfg)?),
            Learner::DecisionStump(cfg) => Model::DecisionStump(DecisionStumpModel::fit(data, cfg)?),
            Learner::Knn { k } => Model::Knn(KnnModel::fit(data, *k)?),
            Learner::Majority => Model::Majority(MajorityModel::fit(data)),
        })
    }
}

/// Any trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    NaiveBayes(NaiveBayesModel),
    DecisionTree(DecisionTreeModel),
    DecisionStump(DecisionStumpModel),
    Knn(KnnModel),
    Majority(MajorityModel),
    Bagged(BaggedEnsemble),
}

impl Classifier for Model {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        match self {
            Model::NaiveBayes(m) => m.predict(bits),
            Model::DecisionTree(m) => m.predict(bits),
            Model::DecisionStump(m) => m.predict(bits),
            Model::Knn(m) => m.predict(bits),
            Model::Majority(m) => m.predict(bits),
            Model::Bagged(m) => m.predict(bits),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn argmax_tie_rule() {
        let d = SenseDistribution::from_pairs([("b", 0.5), ("a", 0.5)]).unwrap();
        assert_eq!(d.argmax(), "a");
        let d = SenseDistribution::from_pairs([("b", 0.6), ("a", 0.4)]).unwrap();
        assert_eq!(d.argmax(), "b");
    }

    #[test]
    fn distribution_validation_and_normalization() {
        assert!(SenseDistribution::from_pairs(Vec::<(String, f64)>::new()).is_err());
        assert!(SenseDistribution::from_pairs([("a", -1.0)]).is_err());
        assert!(SenseDistribution::from_pairs([("a", f64::NAN)]).is_err());
        let d = SenseDistribution::from_pairs([("a", 3.0), ("b", 1.0)])
            .unwrap()
            .normalized();
        assert_eq!(d.get("a"), 0.75);
        let z = SenseDistribution::from_pairs([("a", 0.0), ("b", 0.0)])
            .unwrap()
            .normalized();
        assert_eq!(z.get("b"), 0.5);
    }

    #[test]
    fn majority_examples() {
        let d = majority_baseline(&vecs(&[(&[0], "A"), (&[1], "A"), (&[0], "B")])).unwrap();
        assert_eq!(d.argmax(), "A");
        assert!((d.total() - 1.0).abs() < 1e-12);
        let d = majority_baseline(&vecs(&[(&[0], "B"), (&[0], "A")])).unwrap();
        assert_eq!(d.argmax(), "A");
        assert!(matches!(majority_baseline(&[]), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn training_data_checks() {
        let mut v = vecs(&[(&[0, 1], "A"), (&[1, 1], "B")]);
        v[1].label = None;
        assert!(matches!(TrainingData::from_vectors(&v), Err(Error::Unlabeled(_))));
        let v = vec![vecs(&[(&[0, 1], "A")])[0].clone(), vecs(&[(&[1], "B")])[0].clone()];
        assert!(matches!(
            TrainingData::from_vectors(&v),
            Err(Error::LengthMismatch { .. })
        ));
        let d = TrainingData::from_vectors(&vecs(&[(&[0], "B"), (&[1], "A"), (&[1], "B")])).unwrap();
        assert_eq!(d.senses(), ["A", "B"]);
        assert_eq!(d.class_counts(), [1, 2]);
        let r = d.resample(&[1, 1]);
        assert_eq!(r.senses(), ["A", "B"]);
        assert_eq!(r.class_counts(), [2, 0]);
    }

    #[test]
    fn models_round_trip_through_json() {
        let data = TrainingData::from_vectors(&vecs(&[(&[1, 0], "A"), (&[0, 1], "B"), (&[1, 1], "A"), (&[0, 0], "B")]))
            .unwrap();
        for learner in [
            Learner::NaiveBayes,
            Learner::tree(),
            Learner::stump(),
            Learner::Knn { k: 1 },
            Learner::Majority,
        ] {
            let m = learner.train(&data).unwrap();
            let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            for row in data.rows() {
                assert_eq!(m.predict(row).unwrap(), back.predict(row).unwrap());
            }
        }
    }
}
