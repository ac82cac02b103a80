//! Binary feature vectors over a selected [`FeatureSet`].

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, LexeltDataset};
use crate::ngram::{Feature, FeatureSet, Side};

/// Fixed-length packed bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Number of differing positions. Both vectors must have the same length.
    pub fn hamming(&self, other: &BitVector) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub instance_id: String,
    pub bits: BitVector,
    pub label: Option<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// A [`FeatureSet`] compiled into lookup tables.
#[derive(Debug, Clone)]
pub struct Featurizer {
    width: usize,
    unigrams: HashMap<String, Vec<usize>>,
    /// `(first, second)` → `(bit, max_gap)`; plain bigrams have gap 0.
    pairs: HashMap<(String, String), Vec<(usize, u8)>>,
    neighbors: HashMap<(String, Side), Vec<usize>>,
    widest_gap: usize,
}

impl Featurizer {
    pub fn new(fs: &FeatureSet) -> Self {
        let mut f = Featurizer {
            width: fs.len(),
            unigrams: HashMap::new(),
            pairs: HashMap::new(),
            neighbors: HashMap::new(),
            widest_gap: 0,
        };
        for (i, feat) in fs.features().enumerate() {
            match feat {
                Feature::Unigram { word } => f.unigrams.entry(word.clone()).or_default().push(i),
                Feature::Bigram { first, second } => {
                    f.pairs.entry((first.clone(), second.clone())).or_default().push((i, 0))
                }
                Feature::GappedBigram { first, second, max_gap } => {
                    f.widest_gap = f.widest_gap.max(*max_gap as usize);
                    f.pairs
                        .entry((first.clone(), second.clone()))
                        .or_default()
                        .push((i, *max_gap))
                }
                Feature::Cooccurrence { word, side } => f.neighbors.entry((word.clone(), *side)).or_default().push(i),
            }
        }
        f
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self, inst: &Instance) -> BitVector {
        let mut bits = BitVector::zeros(self.width);
        let toks = &inst.tokens;
        if !self.unigrams.is_empty() {
            for t in toks {
                for &i in self.unigrams.get(t.as_str()).into_iter().flatten() {
                    bits.set(i);
                }
            }
        }
        if !self.pairs.is_empty() {
            let mut key = (String::new(), String::new());
            for i in 0..toks.len() {
                for j in (i + 1)..toks.len().min(i + 2 + self.widest_gap) {
                    let gap = (j - i - 1) as u8;
                    key.0.clear();
                    key.0.push_str(&toks[i]);
                    key.1.clear();
                    key.1.push_str(&toks[j]);
                    for &(bit, max_gap) in self.pairs.get(&key).into_iter().flatten() {
                        if gap <= max_gap {
                            bits.set(bit);
                        }
                    }
                }
            }
        }
        if !self.neighbors.is_empty() {
            let t = inst.target_index;
            let mut mark = |pos: usize, side: Side| {
                for &i in self.neighbors.get(&(toks[pos].to_string(), side)).into_iter().flatten() {
                    bits.set(i);
                }
            };
            if t > 0 {
                mark(t - 1, Side::Left);
            }
            if t + 1 < toks.len() {
                mark(t + 1, Side::Right);
            }
        }
        bits
    }

    pub fn featurize(&self, inst: &Instance) -> FeatureVector {
        FeatureVector {
            instance_id: inst.instance_id.clone(),
            bits: self.bits(inst),
            label: inst.primary_sense().map(str::to_string),
        }
    }
}

/// Bit `i` is set iff feature `i` of `fs` occurs in the instance; the label
/// is the first gold sense, if any.
pub fn featurize(inst: &Instance, fs: &FeatureSet) -> FeatureVector {
    Featurizer::new(fs).featurize(inst)
}

/// Training vectors carry labels; test vectors never do.
pub fn featurize_dataset(ds: &LexeltDataset, fs: &FeatureSet) -> (Vec<FeatureVector>, Vec<FeatureVector>) {
    let fz = Featurizer::new(fs);
    let train = ds.train.iter().map(|i| fz.featurize(i)).collect();
    let test = ds
        .test
        .iter()
        .map(|i| FeatureVector {
            label: None,
            ..fz.featurize(i)
        })
        .collect();
    (train, test)
}

/// ARFF-style dump for inspection: one attribute per feature plus the class.
pub fn to_arff(relation: &str, fs: &FeatureSet, vectors: &[FeatureVector], senses: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "@relation '{}'", relation.replace('\'', "\\'"));
    for f in fs.features() {
        let name = f.to_string().replace('\'', "\\'");
        let _ = writeln!(s, "@attribute '{}:{name}' {{0,1}}", f.kind());
    }
    let _ = writeln!(s, "@attribute class {{{}}}", senses.join(","));
    let _ = writeln!(s, "@data");
    for v in vectors {
        for i in 0..v.bits.len() {
            s.push(if v.bits.get(i) { '1' } else { '0' });
            s.push(',');
        }
        s.push_str(v.label.as_deref().unwrap_or("?"));
        s.push('\n');
    }
    s
}
