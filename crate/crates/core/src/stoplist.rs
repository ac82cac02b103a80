//! Corpus-induced stop-lists.
//!
//! A stop-list is every token that occurs at least `min_count` times over the
//! training splits of a few randomly chosen lexelts of comparable size.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::LexeltDataset;
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_SIZE: usize = 5;
pub const DEFAULT_MIN_COUNT: u64 = 10;

/// Files whose training token count is within this fraction of the median
/// count are considered "of comparable size".
pub const COMPARABLE_SIZE_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Induced {
        sampled: Vec<String>,
        seed: u64,
        sample_size: usize,
        min_count: u64,
    },
    File(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: BTreeSet<String>,
    pub provenance: Provenance,
}

impl Default for StopList {
    fn default() -> Self {
        StopList::empty()
    }
}

impl StopList {
    pub fn empty() -> Self {
        StopList {
            words: BTreeSet::new(),
            provenance: Provenance::Empty,
        }
    }

    /// Builds a list from explicit words; they are case-folded on entry.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopList {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
            provenance: Provenance::Empty,
        }
    }

    /// Membership after case folding, so `"The"` matches a stored `"the"`.
    pub fn contains(&self, word: &str) -> bool {
        if self.words.contains(word) {
            return true;
        }
        word.chars().any(char::is_uppercase) && self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Short content digest, recorded with feature selections.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<StopList> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut list = StopList::from_words(text.lines().map(str::trim).filter(|l| !l.is_empty()));
        list.provenance = Provenance::File(path.display().to_string());
        Ok(list)
    }

    /// One word per line, sorted.
    pub fn to_text(&self) -> String {
        self.words.iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn is_stopped(word: &str, list: &StopList) -> bool {
    list.contains(word)
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Lexelts whose training token count lies within ±25% of the median, sorted
/// by lexelt name.
pub fn comparable_lexelts(datasets: &[LexeltDataset]) -> Vec<&LexeltDataset> {
    let mut with_train: Vec<&LexeltDataset> = datasets.iter().filter(|d| !d.train.is_empty()).collect();
    if with_train.is_empty() {
        return with_train;
    }
    let mut sizes: Vec<usize> = with_train.iter().map(|d| d.train_token_count()).collect();
    sizes.sort_unstable();
    let med = median(&sizes);
    with_train.retain(|d| (d.train_token_count() as f64 - med).abs() <= COMPARABLE_SIZE_TOLERANCE * med);
    with_train.sort_by(|a, b| a.lexelt.cmp(&b.lexelt));
    with_train
}

pub fn build_stoplist(datasets: &[LexeltDataset], seed: u64, sample_size: usize, min_count: u64) -> Result<StopList> {
    if datasets.iter().all(|d| d.train.is_empty()) {
        return Err(Error::InvalidParameter(
            "cannot induce a stop-list: every training split is empty".into(),
        ));
    }
    let eligible = comparable_lexelts(datasets);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled: Vec<&LexeltDataset> = eligible
        .choose_multiple(&mut rng, sample_size.min(eligible.len()))
        .copied()
        .collect();
    sampled.sort_by(|a, b| a.lexelt.cmp(&b.lexelt));

    let mut counts: HashMap<&str, u64> = HashMap::new();
    for ds in &sampled {
        for inst in &ds.train {
            for t in &inst.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    Ok(StopList {
        words: counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(w, _)| w.to_lowercase())
            .collect(),
        provenance: Provenance::Induced {
            sampled: sampled.iter().map(|d| d.lexelt.clone()).collect(),
            seed,
            sample_size,
            min_count,
        },
    })
}
