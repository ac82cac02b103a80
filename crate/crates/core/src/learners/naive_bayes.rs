use serde::{Deserialize, Serialize};

use super::{check_width, Classifier, SenseDistribution, TrainingData};
use crate::error::Result;
use crate::featurize::{BitVector, FeatureVector};

/// Multivariate Bernoulli Naive Bayes with add-one smoothing.
///
/// Priors are `(count(s) + 1) / (N + |S|)` and each feature's presence
/// probability is `(count(f = 1, s) + 1) / (count(s) + 2)`. Absent features
/// contribute `1 - P(f = 1 | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub senses: Vec<String>,
    pub priors: Vec<f64>,
    /// `p_present[s][f] = P(f = 1 | s)`.
    pub p_present: Vec<Vec<f64>>,
}

impl NaiveBayesModel {
    pub fn fit(data: &TrainingData) -> Self {
        let n_senses = data.senses().len();
        let class_counts = data.class_counts();
        let mut present = vec![vec![0u64; data.width()]; n_senses];
        for (row, &label) in data.rows().iter().zip(data.labels()) {
            for f in row.ones() {
                present[label][f] += 1;
            }
        }
        let n = data.len() as f64;
        let priors = class_counts
            .iter()
            .map(|&c| (c as f64 + 1.0) / (n + n_senses as f64))
            .collect();
        let p_present = present
            .iter()
            .zip(&class_counts)
            .map(|(row, &c)| row.iter().map(|&k| (k as f64 + 1.0) / (c as f64 + 2.0)).collect())
            .collect();
        NaiveBayesModel {
            senses: data.senses().to_vec(),
            priors,
            p_present,
        }
    }

    pub fn width(&self) -> usize {
        self.p_present.first().map_or(0, Vec::len)
    }

    /// `ln P(s) + Σ_f ln P(bit_f | s)` for every sense, in sense order.
    pub fn log_joint(&self, bits: &BitVector) -> Result<Vec<f64>> {
        check_width(self.width(), bits)?;
        Ok(self
            .priors
            .iter()
            .zip(&self.p_present)
            .map(|(&prior, probs)| {
                let mut lp = prior.ln();
                for (f, &p) in probs.iter().enumerate() {
                    lp += if bits.get(f) { p.ln() } else { (1.0 - p).ln() };
                }
                lp
            })
            .collect())
    }
}

impl Classifier for NaiveBayesModel {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        let lj = self.log_joint(bits)?;
        let max = lj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = lj.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        SenseDistribution::from_pairs(self.senses.iter().cloned().zip(weights.into_iter().map(|w| w / total)))
    }
}

pub fn train_naive_bayes(train: &[FeatureVector]) -> Result<NaiveBayesModel> {
    Ok(NaiveBayesModel::fit(&TrainingData::from_vectors(train)?))
}

pub fn nb_predict(m: &NaiveBayesModel, v: &FeatureVector) -> Result<SenseDistribution> {
    m.predict(&v.bits)
}
