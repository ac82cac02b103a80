//! Synthetic lexical-sample corpora with a known answer, for end-to-end checks.
//!
//! Every instance is a window of noise around the target word. In the planted
//! variant the token immediately left of the target is a cue word chosen by
//! the sense; the null variant shuffles the labels so that nothing in the text
//! predicts them.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Instance, LexeltDataset, Token};
use crate::error::{Error, Result};

pub const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "that", "it", "was", "for", "on", "with", "as", "at", "by",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub lexelt: String,
    pub target: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Relative sense frequencies; senses are named `s0`, `s1`, ...
    pub sense_weights: Vec<f64>,
    /// Tokens on each side of the target.
    pub context: usize,
    pub noise_vocab: usize,
    /// Probability that a context position holds a function word.
    pub function_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            lexelt: "bank.n".into(),
            target: "bank".into(),
            n_train: 500,
            n_test: 200,
            sense_weights: vec![0.6, 0.4],
            context: 8,
            noise_vocab: 150,
            function_rate: 0.35,
            seed: 7,
        }
    }
}

pub fn sense_name(i: usize) -> String {
    format!("s{i}")
}

/// The word planted left of the target for sense `i`.
pub fn cue_word(i: usize) -> String {
    format!("cue{i}")
}

fn noise_word(i: usize) -> String {
    format!("w{i:03}")
}

/// A corpus whose left neighbour of the target determines the sense.
pub fn planted(cfg: &SynthConfig) -> Result<LexeltDataset> {
    if cfg.sense_weights.is_empty() || cfg.noise_vocab == 0 || cfg.context == 0 {
        return Err(Error::InvalidParameter(
            "synthetic corpus needs senses, vocabulary and context".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.function_rate) {
        return Err(Error::InvalidParameter("function_rate must be in [0, 1]".into()));
    }
    let senses =
        WeightedIndex::new(&cfg.sense_weights).map_err(|e| Error::InvalidParameter(format!("sense weights: {e}")))?;
    // Zipf-like noise vocabulary
    let zipf = WeightedIndex::new((1..=cfg.noise_vocab).map(|r| 1.0 / r as f64)).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ds = LexeltDataset::new(cfg.lexelt.clone());
    for n in 0..cfg.n_train + cfg.n_test {
        let sense = senses.sample(&mut rng);
        let mut words: Vec<String> = Vec::with_capacity(2 * cfg.context + 1);
        for pos in 0..2 * cfg.context + 1 {
            let w = if pos == cfg.context {
                cfg.target.clone()
            } else if pos + 1 == cfg.context {
                cue_word(sense)
            } else if rng.random_bool(cfg.function_rate) {
                FUNCTION_WORDS[rng.random_range(0..FUNCTION_WORDS.len())].to_string()
            } else {
                noise_word(zipf.sample(&mut rng))
            };
            words.push(w);
        }
        let (split, id) = if n < cfg.n_train {
            (&mut ds.train, format!("{}.train.{n:05}", cfg.lexelt))
        } else {
            (&mut ds.test, format!("{}.test.{:05}", cfg.lexelt, n - cfg.n_train))
        };
        split.push(Instance {
            lexelt: cfg.lexelt.clone(),
            instance_id: id,
            gold_senses: vec![sense_name(sense)],
            tokens: words.into_iter().map(|w| Token::new(w).expect("non-empty")).collect(),
            target_index: cfg.context,
        });
    }
    Ok(ds)
}

/// The planted corpus with labels permuted within each split, so sense
/// frequencies are kept but the text carries no information about them.
pub fn null_signal(cfg: &SynthConfig) -> Result<LexeltDataset> {
    let mut ds = planted(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_0a11);
    for split in [&mut ds.train, &mut ds.test] {
        let mut labels: Vec<Vec<String>> = split.iter().map(|i| i.gold_senses.clone()).collect();
        labels.shuffle(&mut rng);
        for (inst, l) in split.iter_mut().zip(labels) {
            inst.gold_senses = l;
        }
    }
    Ok(ds)
}
