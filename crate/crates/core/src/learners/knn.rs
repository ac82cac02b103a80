use serde::{Deserialize, Serialize};

use super::{check_width, Classifier, SenseDistribution, TrainingData};
use crate::error::{Error, Result};
use crate::featurize::{BitVector, FeatureVector};

/// k-nearest-neighbour over Hamming distance. Equidistant neighbours are
/// ranked by training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub senses: Vec<String>,
    pub rows: Vec<BitVector>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub width: usize,
}

impl KnnModel {
    pub fn fit(data: &TrainingData, k: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 || k > data.len() {
            return Err(Error::InvalidParameter(format!(
                "k must be between 1 and {} (training size), got {k}",
                data.len()
            )));
        }
        Ok(KnnModel {
            senses: data.senses().to_vec(),
            rows: data.rows().to_vec(),
            labels: data.labels().to_vec(),
            k,
            width: data.width(),
        })
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbours(&self, bits: &BitVector) -> Vec<usize> {
        let mut ranked: Vec<(u32, usize)> = self.rows.iter().map(|r| r.hamming(bits)).zip(0..).collect();
        if self.k < ranked.len() {
            ranked.select_nth_unstable(self.k - 1);
            ranked.truncate(self.k);
        }
        ranked.sort_unstable();
        ranked.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for KnnModel {
    /// Fraction of the `k` neighbours voting for each sense.
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        check_width(self.width, bits)?;
        if self.rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut votes = vec![0usize; self.senses.len()];
        for i in self.neighbours(bits) {
            votes[self.labels[i]] += 1;
        }
        SenseDistribution::from_pairs(
            self.senses
                .iter()
                .cloned()
                .zip(votes.into_iter().map(|v| v as f64 / self.k as f64)),
        )
    }
}

pub fn train_knn(train: &[FeatureVector], k: usize) -> Result<KnnModel> {
    KnnModel::fit(&TrainingData::from_vectors(train)?, k)
}

pub fn knn_predict(m: &KnnModel, v: &FeatureVector) -> Result<SenseDistribution> {
    m.predict(&v.bits)
}
