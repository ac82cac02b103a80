//! Supervised lexical-sample word sense disambiguation.
//!
//! The crate covers the whole pipeline for per-word ("lexelt") supervised
//! disambiguation from purely lexical context:
//!
//! * [`corpus`]: tokenization, the canonical JSON Lines dataset format and
//!   an adapter for lexical-sample XML distributions.
//! * [`stoplist`]: corpus-induced stop-lists.
//! * [`ngram`]: unigram, bigram, gapped-bigram and target co-occurrence
//!   counting, the G² log-likelihood ratio and threshold-based selection.
//! * [`featurize`]: binary feature vectors over a selected feature set.
//! * [`learners`]: Naive Bayes, a C4.5-style decision tree, decision stump,
//!   1-nearest-neighbour and the majority baseline.
//! * [`ensemble`]: bagging and weighted / majority voting.
//! * [`systems`]: the registry of the eight system configurations and the
//!   driver that trains and applies them to a lexelt.
//! * [`eval`]: fine-grained scoring, answer files and agreement analysis.
//! * [`experiment`]: manifest-driven batch runs used by the `wsd` CLI.
//!
//! Data-parallel work (bagging replicates, per-lexelt units, batch
//! prediction) runs on rayon when the `parallel` feature is enabled and
//! falls back to plain iterators otherwise; see [`exec::Exec`].

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod featurize;
pub mod learners;
pub mod ngram;
pub mod stoplist;
pub mod synth;
pub mod systems;

pub use error::{Error, Result};
