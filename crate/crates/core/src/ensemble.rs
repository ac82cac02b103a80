//! Bagging and vote combination.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::featurize::BitVector;
use crate::learners::{Classifier, Learner, Model, SenseDistribution, TrainingData};

pub const DEFAULT_REPLICATES: usize = 10;

/// Recorded in run metadata so results can be reproduced elsewhere.
pub const RNG_DESCRIPTION: &str = "chacha8 (rand_chacha 0.9), seed_from_u64(seed), one stream per replicate";

/// `n` indices drawn uniformly with replacement from `0..n`. Replicate `r`
/// uses ChaCha8 stream `r` of `seed`, so replicates are independent and each
/// is reproducible on its own.
pub fn bootstrap_sample(n: usize, seed: u64, replicate: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

/// Homogeneous members trained on bootstrap replicates; predicts by
/// weighted vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedEnsemble {
    pub members: Vec<Model>,
    pub seed: u64,
    pub replicates: usize,
}

impl Classifier for BaggedEnsemble {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        let dists = self
            .members
            .iter()
            .map(|m| m.predict(bits))
            .collect::<Result<Vec<_>>>()?;
        weighted_vote(&dists)
    }
}

pub fn bag(learner: &Learner, data: &TrainingData, seed: u64, replicates: usize) -> Result<BaggedEnsemble> {
    bag_with(learner, data, seed, replicates, Exec::default())
}

/// Like [`bag`], with explicit control over replicate-level parallelism.
/// Results are identical in both modes.
pub fn bag_with(
    learner: &Learner,
    data: &TrainingData,
    seed: u64,
    replicates: usize,
    exec: Exec,
) -> Result<BaggedEnsemble> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter("bagging needs at least one replicate".into()));
    }
    let ids: Vec<u64> = (0..replicates as u64).collect();
    let members = exec.try_map(&ids, |&r| {
        let sample = bootstrap_sample(data.len(), seed, r)?;
        learner.train(&data.resample(&sample))
    })?;
    Ok(BaggedEnsemble {
        members,
        seed,
        replicates,
    })
}

/// Sums the normalized member distributions per sense and renormalizes.
/// Each sense's contributions are added in sorted order, so the result does
/// not depend on member order.
pub fn weighted_vote(dists: &[SenseDistribution]) -> Result<SenseDistribution> {
    if dists.is_empty() {
        return Err(Error::EmptyVote);
    }
    let mut per_sense: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let normalized: Vec<SenseDistribution> = dists.iter().map(SenseDistribution::normalized).collect();
    for d in &normalized {
        for (s, v) in d.iter() {
            per_sense.entry(s).or_default().push(v);
        }
    }
    let sums = per_sense.into_iter().map(|(s, mut vs)| {
        vs.sort_by(f64::total_cmp);
        (s, vs.iter().sum::<f64>())
    });
    Ok(SenseDistribution::from_pairs(sums)?.normalized())
}

/// Most frequent label. Ties are broken by the summed member distributions,
/// then by the lexicographic rule.
pub fn majority_vote(labels: &[&str], dists: &[SenseDistribution]) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::EmptyVote);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max().expect("non-empty");
    let tied: Vec<&str> = counts.iter().filter(|(_, &c)| c == top).map(|(&s, _)| s).collect();
    if tied.len() == 1 || dists.is_empty() {
        return Ok(tied[0].to_string());
    }
    let summed = weighted_vote(dists)?;
    let restricted = SenseDistribution::from_pairs(tied.iter().map(|&s| (s, summed.get(s))))?;
    Ok(restricted.argmax().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    Weighted,
    Majority,
}

/// A sense decision with the scores behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub sense: String,
    pub distribution: SenseDistribution,
}

impl Decision {
    pub fn from_distribution(distribution: SenseDistribution) -> Self {
        Decision {
            sense: distribution.argmax().to_string(),
            distribution,
        }
    }
}

/// Combines member decisions. Weighted mode votes with distributions; majority
/// mode votes with member senses and reports the vote fractions over every
/// sense any member scored.
pub fn combine(mode: VoteMode, members: &[Decision]) -> Result<Decision> {
    let dists: Vec<SenseDistribution> = members.iter().map(|d| d.distribution.clone()).collect();
    match mode {
        VoteMode::Weighted => Ok(Decision::from_distribution(weighted_vote(&dists)?)),
        VoteMode::Majority => {
            let labels: Vec<&str> = members.iter().map(|d| d.sense.as_str()).collect();
            let sense = majority_vote(&labels, &dists)?;
            let mut fractions: BTreeMap<String, f64> = BTreeMap::new();
            for d in members {
                for s in d.distribution.support() {
                    fractions.entry(s.to_string()).or_insert(0.0);
                }
                *fractions.entry(d.sense.clone()).or_insert(0.0) += 1.0 / members.len() as f64;
            }
            Ok(Decision {
                sense,
                distribution: SenseDistribution::new(fractions)?,
            })
        }
    }
}

/// Heterogeneous members over the same feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEnsemble {
    pub members: Vec<Model>,
    pub mode: VoteMode,
}

impl VotingEnsemble {
    pub fn new(members: Vec<Model>, mode: VoteMode) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyVote);
        }
        Ok(VotingEnsemble { members, mode })
    }

    pub fn decide(&self, bits: &BitVector) -> Result<Decision> {
        let decisions = self
            .members
            .iter()
            .map(|m| m.predict(bits).map(Decision::from_distribution))
            .collect::<Result<Vec<_>>>()?;
        combine(self.mode, &decisions)
    }
}

impl Classifier for VotingEnsemble {
    fn predict(&self, bits: &BitVector) -> Result<SenseDistribution> {
        Ok(self.decide(bits)?.distribution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureVector;
    use proptest::prelude::*;

    fn dist(pairs: &[(&str, f64)]) -> SenseDistribution {
        SenseDistribution::from_pairs(pairs.iter().map(|&(s, v)| (s, v))).unwrap()
    }

    #[test]
    fn bootstrap_basics() {
        assert_eq!(bootstrap_sample(1, 9, 0).unwrap(), vec![0]);
        assert_eq!(bootstrap_sample(50, 9, 3).unwrap(), bootstrap_sample(50, 9, 3).unwrap());
        assert_ne!(bootstrap_sample(50, 9, 3).unwrap(), bootstrap_sample(50, 9, 4).unwrap());
        assert!(bootstrap_sample(0, 9, 0).is_err());
    }

    #[test]
    fn bootstrap_distinct_fraction() {
        let n = 10_000;
        let s = bootstrap_sample(n, 42, 0).unwrap();
        assert!(s.iter().all(|&i| i < n));
        let distinct = s.iter().collect::<std::collections::HashSet<_>>().len() as f64 / n as f64;
        let expected = 1.0 - (-1.0f64).exp();
        assert!((distinct - expected).abs() < 0.02, "{distinct}");
    }

    #[test]
    fn weighted_vote_examples() {
        let d = dist(&[("A", 0.6), ("B", 0.4)]);
        assert_eq!(weighted_vote(std::slice::from_ref(&d)).unwrap(), d);
        let v = weighted_vote(&[d, dist(&[("A", 0.3), ("B", 0.7)])]).unwrap();
        assert!((v.get("A") - 0.45).abs() < 1e-12);
        assert!((v.get("B") - 0.55).abs() < 1e-12);
        assert_eq!(v.argmax(), "B");
        assert!(matches!(weighted_vote(&[]), Err(Error::EmptyVote)));
    }

    #[test]
    fn weighted_vote_normalizes_members_and_fills_missing_senses() {
        let v = weighted_vote(&[dist(&[("A", 3.0), ("B", 1.0)]), dist(&[("C", 1.0)])]).unwrap();
        assert!((v.get("A") - 0.375).abs() < 1e-12);
        assert!((v.get("C") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&["A", "A", "B"], &[]).unwrap(), "A");
        assert_eq!(majority_vote(&["A"], &[]).unwrap(), "A");
        let dists = [dist(&[("A", 0.55), ("B", 0.45)]), dist(&[("A", 0.1), ("B", 0.9)])];
        assert_eq!(majority_vote(&["A", "B"], &dists).unwrap(), "B");
        assert_eq!(majority_vote(&["B", "A"], &[]).unwrap(), "A");
        assert!(majority_vote(&[], &[]).is_err());
    }

    #[test]
    fn combine_majority_reports_fractions() {
        let members = [
            Decision::from_distribution(dist(&[("A", 0.9), ("B", 0.1)])),
            Decision::from_distribution(dist(&[("A", 0.8), ("B", 0.2)])),
            Decision::from_distribution(dist(&[("B", 0.6), ("C", 0.4)])),
        ];
        let d = combine(VoteMode::Majority, &members).unwrap();
        assert_eq!(d.sense, "A");
        assert!((d.distribution.get("A") - 2.0 / 3.0).abs() < 1e-12);
        assert!(d.distribution.contains("C"));
        let w = combine(VoteMode::Weighted, &members).unwrap();
        assert_eq!(w.sense, "A");
    }

    fn data(rows: &[(bool, &str)]) -> TrainingData {
        let v: Vec<FeatureVector> = rows
            .iter()
            .enumerate()
            .map(|(i, &(b, l))| FeatureVector {
                instance_id: i.to_string(),
                bits: BitVector::from_bools(&[b]),
                label: Some(l.into()),
            })
            .collect();
        TrainingData::from_vectors(&v).unwrap()
    }

    #[test]
    fn bagging_member_count_and_single_class() {
        let d = data(&[(true, "A"), (false, "A"), (true, "A")]);
        let b = bag(&Learner::tree(), &d, 42, DEFAULT_REPLICATES).unwrap();
        assert_eq!(b.members.len(), 10);
        for m in &b.members {
            assert_eq!(m.predict(&BitVector::from_bools(&[false])).unwrap().argmax(), "A");
        }
        assert!(bag(&Learner::tree(), &d, 42, 0).is_err());
    }

    #[test]
    fn bagging_is_deterministic_in_both_modes() {
        let rows: Vec<(bool, &str)> = (0..40)
            .map(|i| (i % 3 == 0, if i % 5 < 2 { "A" } else { "B" }))
            .collect();
        let d = data(&rows);
        let a = bag_with(&Learner::NaiveBayes, &d, 7, 10, Exec::Sequential).unwrap();
        let b = bag_with(&Learner::NaiveBayes, &d, 7, 10, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = bag(&Learner::NaiveBayes, &d, 8, 10).unwrap();
        assert_ne!(a, c);
    }

    fn arb_dist() -> impl Strategy<Value = SenseDistribution> {
        proptest::collection::btree_map("[a-d]", 0.0f64..1.0, 1..4).prop_map(|m| SenseDistribution::new(m).unwrap())
    }

    proptest! {
        #[test]
        fn weighted_vote_is_permutation_invariant(mut ds in proptest::collection::vec(arb_dist(), 1..6), seed in any::<u64>()) {
            let a = weighted_vote(&ds).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(ds.as_mut_slice(), &mut rng);
            let b = weighted_vote(&ds).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((a.total() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn weighted_vote_of_copies_keeps_argmax(d in arb_dist(), k in 1usize..8) {
            let copies = vec![d.clone(); k];
            let voted = weighted_vote(&copies).unwrap();
            let single = d.normalized();
            prop_assert_eq!(voted.argmax(), single.argmax());
        }

        #[test]
        fn majority_returns_a_member_label(labels in proptest::collection::vec("[a-d]", 1..9)) {
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let dists: Vec<SenseDistribution> = refs.iter().map(|&l| SenseDistribution::point(l)).collect();
            let v = majority_vote(&refs, &dists).unwrap();
            prop_assert!(labels.contains(&v));
        }
    }
}
