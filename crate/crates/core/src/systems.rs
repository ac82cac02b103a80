//! The registry of the eight system configurations per language and the
//! driver that trains one configuration on a lexelt and tags its test
//! instances.
//!
//! | English | Spanish | features | classifier |
//! |---------|---------|----------|------------|
//! | duluth1 | duluth6 | bigram, unigram, co-occurrence | one Naive Bayes per set, weighted vote |
//! | duluth2 | duluth7 | bigram | bagged decision tree |
//! | duluth3 | duluth8 | bigram, unigram, co-occurrence | one bagged tree per set, majority vote |
//! | duluth4 | duluth9 | unigram | Naive Bayes |
//! | duluth5 | duluth10 | bigram ∪ co-occurrence | bagged decision tree |
//! | duluthA | duluthX | gapped bigram | bagged tree + Naive Bayes + 1-NN, weighted vote |
//! | duluthB | duluthY | bigram ∪ co-occurrence | decision stump |
//! | duluthC | duluthZ | (members' own) | weighted vote of the seven systems above |

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Instance, LexeltDataset};
use crate::ensemble::{bag_with, combine, Decision, VoteMode, DEFAULT_REPLICATES, RNG_DESCRIPTION};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::featurize::Featurizer;
use crate::learners::{Classifier, Learner, MajorityModel, Model, TrainingData, TreeConfig};
use crate::ngram::{select_features, FeatureKind, FeatureSet, FeatureSpec, G2_P001, G2_P01, G2_P10};
use crate::stoplist::StopList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Es,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
        }
    }

    /// Registry names in canonical order; the last one is the combined system.
    pub fn system_names(self) -> [&'static str; 8] {
        match self {
            Language::En => ENGLISH_SYSTEMS,
            Language::Es => SPANISH_SYSTEMS,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::En),
            "es" | "spanish" => Ok(Language::Es),
            _ => Err(Error::InvalidParameter(format!("unknown language {s:?}"))),
        }
    }
}

pub const ENGLISH_SYSTEMS: [&str; 8] = [
    "duluth1", "duluth2", "duluth3", "duluth4", "duluth5", "duluthA", "duluthB", "duluthC",
];
pub const SPANISH_SYSTEMS: [&str; 8] = [
    "duluth6", "duluth7", "duluth8", "duluth9", "duluth10", "duluthX", "duluthY", "duluthZ",
];

/// One trained unit: a feature set (union of `features`) and a learner,
/// optionally bagged. `key` names the unit for seed derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub key: String,
    pub features: Vec<FeatureSpec>,
    pub learner: Learner,
    #[serde(default)]
    pub bagging: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum Pipeline {
    Single(Component),
    Vote { mode: VoteMode, members: Vec<Pipeline> },
}

impl Pipeline {
    pub fn components(&self) -> Vec<&Component> {
        match self {
            Pipeline::Single(c) => vec![c],
            Pipeline::Vote { members, .. } => members.iter().flat_map(Pipeline::components).collect(),
        }
    }

    fn components_mut(&mut self) -> Vec<&mut Component> {
        match self {
            Pipeline::Single(c) => vec![c],
            Pipeline::Vote { members, .. } => members.iter_mut().flat_map(Pipeline::components_mut).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Weighted,
    Majority,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    pub language: Language,
    pub pipeline: Pipeline,
}

impl SystemConfig {
    pub fn combine(&self) -> Combine {
        match &self.pipeline {
            Pipeline::Single(_) => Combine::None,
            Pipeline::Vote {
                mode: VoteMode::Weighted,
                ..
            } => Combine::Weighted,
            Pipeline::Vote {
                mode: VoteMode::Majority,
                ..
            } => Combine::Majority,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Short digest of the full parameterization.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("configs serialize");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Sets one parameter everywhere it occurs. Keys are
    /// `<kind>.min_freq`, `<kind>.g2_min`, `<kind>.max_gap`,
    /// `<kind>.stop_neighbors` (kind = unigram, bigram, cooccurrence,
    /// gapped_bigram), `bagging.replicates`, `tree.confidence`,
    /// `tree.min_leaf`, `tree.prune` and `knn.k`. Returns how many places
    /// were changed.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<usize> {
        let bad = |what: &str| Error::InvalidParameter(format!("override {key}={value}: {what}"));
        let (group, param) = key.split_once('.').ok_or_else(|| bad("expected <group>.<parameter>"))?;
        let mut changed = 0;
        match group {
            "bagging" | "tree" | "knn" => {
                for c in self.pipeline.components_mut() {
                    match (group, param, &mut c.learner) {
                        ("bagging", "replicates", _) => {
                            if c.bagging.is_some() {
                                let r: usize = value.parse().map_err(|_| bad("not a count"))?;
                                if r == 0 {
                                    return Err(bad("must be at least 1"));
                                }
                                c.bagging = Some(r);
                                changed += 1;
                            }
                        }
                        ("tree", _, Learner::DecisionTree(cfg) | Learner::DecisionStump(cfg)) => {
                            set_tree_param(cfg, param, value).map_err(|m| bad(&m))?;
                            changed += 1;
                        }
                        ("knn", "k", Learner::Knn { k }) => {
                            *k = value.parse().map_err(|_| bad("not a count"))?;
                            changed += 1;
                        }
                        ("bagging", _, _) | ("knn", _, _) if !matches!(param, "replicates" | "k") => {
                            return Err(bad("unknown parameter"))
                        }
                        _ => {}
                    }
                }
            }
            kind => {
                let kind: FeatureKind = kind.parse()?;
                for c in self.pipeline.components_mut() {
                    for spec in c.features.iter_mut().filter(|s| s.kind == kind) {
                        match param {
                            "min_freq" => spec.min_freq = value.parse().map_err(|_| bad("not a count"))?,
                            "g2_min" if kind != FeatureKind::Unigram => {
                                spec.g2_min = Some(value.parse().map_err(|_| bad("not a number"))?)
                            }
                            "max_gap" => spec.max_gap = value.parse().map_err(|_| bad("not a count"))?,
                            "stop_neighbors" => spec.stop_neighbors = value.parse().map_err(|_| bad("not a bool"))?,
                            _ => return Err(bad("unknown parameter")),
                        }
                        spec.validate()?;
                        changed += 1;
                    }
                }
            }
        }
        Ok(changed)
    }
}

fn set_tree_param(cfg: &mut TreeConfig, param: &str, value: &str) -> std::result::Result<(), String> {
    match param {
        "confidence" => cfg.confidence = value.parse().map_err(|_| "not a number".to_string())?,
        "min_leaf" => cfg.min_leaf = value.parse().map_err(|_| "not a count".to_string())?,
        "prune" => cfg.prune = value.parse().map_err(|_| "not a bool".to_string())?,
        _ => return Err("unknown parameter".into()),
    }
    Ok(())
}

fn single(key: &str, features: Vec<FeatureSpec>, learner: Learner, bagging: Option<usize>) -> Pipeline {
    Pipeline::Single(Component {
        key: key.to_string(),
        features,
        learner,
        bagging,
    })
}

fn three_views(name: &str, learner: Learner, bagging: Option<usize>, mode: VoteMode) -> Pipeline {
    let views = [
        ("bigram", FeatureSpec::bigrams(2, G2_P01)),
        ("unigram", FeatureSpec::unigrams(5)),
        ("cooccurrence", FeatureSpec::cooccurrences(2, G2_P10)),
    ];
    Pipeline::Vote {
        mode,
        members: views
            .into_iter()
            .map(|(view, spec)| single(&format!("{name}/{view}"), vec![spec], learner.clone(), bagging))
            .collect(),
    }
}

/// Position of `name` in the registry of `language` (case-insensitive).
fn registry_slot(name: &str, language: Language) -> Option<usize> {
    language
        .system_names()
        .iter()
        .position(|n| n.eq_ignore_ascii_case(name))
}

pub fn build_system(name: &str, language: Language) -> Result<SystemConfig> {
    let slot = registry_slot(name, language).ok_or_else(|| Error::UnknownSystem {
        name: name.to_string(),
        language: language.to_string(),
    })?;
    let name = language.system_names()[slot];
    let bag = Some(DEFAULT_REPLICATES);
    let bigram = FeatureSpec::bigrams(2, G2_P01);
    let cooc = FeatureSpec::cooccurrences(2, G2_P10);
    let pipeline = match slot {
        0 => three_views(name, Learner::NaiveBayes, None, VoteMode::Weighted),
        1 => single(name, vec![bigram], Learner::tree(), bag),
        2 => three_views(name, Learner::tree(), bag, VoteMode::Majority),
        3 => {
            let min_freq = match language {
                Language::En => 5,
                Language::Es => 2,
            };
            single(name, vec![FeatureSpec::unigrams(min_freq)], Learner::NaiveBayes, None)
        }
        4 => single(name, vec![bigram, cooc], Learner::tree(), bag),
        5 => {
            let g2 = match language {
                Language::En => G2_P001,
                Language::Es => 0.0,
            };
            let spec = FeatureSpec::gapped_bigrams(2, 2, g2);
            Pipeline::Vote {
                mode: VoteMode::Weighted,
                members: vec![
                    single(&format!("{name}/tree"), vec![spec.clone()], Learner::tree(), bag),
                    single(&format!("{name}/nb"), vec![spec.clone()], Learner::NaiveBayes, None),
                    single(&format!("{name}/knn"), vec![spec], Learner::Knn { k: 1 }, None),
                ],
            }
        }
        6 => single(name, vec![bigram, cooc], Learner::stump(), None),
        _ => Pipeline::Vote {
            mode: VoteMode::Weighted,
            members: language.system_names()[..7]
                .iter()
                .map(|n| build_system(n, language).map(|c| c.pipeline))
                .collect::<Result<_>>()?,
        },
    };
    Ok(SystemConfig {
        name: name.to_string(),
        language,
        pipeline,
    })
}

/// Per-component seed: the run seed mixed with the component key, so a
/// system embedded in a combined system trains exactly as it does alone.
pub fn component_seed(seed: u64, key: &str) -> u64 {
    // FNV-1a over the key, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedComponent {
    pub key: String,
    pub features: FeatureSet,
    pub model: Model,
    /// Set when no feature survived selection and the majority baseline
    /// stands in for the learner.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum TrainedPipeline {
    Single(TrainedComponent),
    Vote {
        mode: VoteMode,
        members: Vec<TrainedPipeline>,
    },
}

impl TrainedPipeline {
    pub fn components(&self) -> Vec<&TrainedComponent> {
        match self {
            TrainedPipeline::Single(c) => vec![c],
            TrainedPipeline::Vote { members, .. } => members.iter().flat_map(TrainedPipeline::components).collect(),
        }
    }
}

pub const MODEL_FORMAT: &str = "lexsample-model";
pub const MODEL_VERSION: u32 = 1;

/// A system trained on one lexelt, ready to tag instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSystem {
    pub format: String,
    pub version: u32,
    pub system: String,
    pub lexelt: String,
    pub seed: u64,
    pub config_digest: String,
    pub pipeline: TrainedPipeline,
}

impl TrainedSystem {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trained systems serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedSystem = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format {} v{} (expected {MODEL_FORMAT} v{MODEL_VERSION})",
                m.format, m.version
            )));
        }
        Ok(m)
    }

    pub fn fallbacks(&self) -> Vec<String> {
        self.pipeline
            .components()
            .into_iter()
            .filter(|c| c.fallback)
            .map(|c| c.key.clone())
            .collect()
    }
}

struct Trainer<'a> {
    ds: &'a LexeltDataset,
    stoplist: &'a StopList,
    seed: u64,
    exec: Exec,
    selected: HashMap<String, FeatureSet>,
}

impl Trainer<'_> {
    fn features(&mut self, specs: &[FeatureSpec]) -> Result<FeatureSet> {
        let mut fs = FeatureSet::default();
        for spec in specs {
            let cache_key = serde_json::to_string(spec).expect("specs serialize");
            let part = match self.selected.get(&cache_key) {
                Some(part) => part.clone(),
                None => {
                    let part = select_features(&self.ds.train, spec, self.stoplist)?;
                    self.selected.insert(cache_key, part.clone());
                    part
                }
            };
            fs = fs.union(&part);
        }
        Ok(fs)
    }

    fn component(&mut self, c: &Component) -> Result<TrainedComponent> {
        let features = self.features(&c.features)?;
        let fz = Featurizer::new(&features);
        let vectors: Vec<_> = self.ds.train.iter().map(|i| fz.featurize(i)).collect();
        let data = TrainingData::from_vectors(&vectors)?;
        if features.is_empty() {
            log::warn!(
                "{}: {} selected no features; using the majority baseline",
                self.ds.lexelt,
                c.key
            );
            return Ok(TrainedComponent {
                key: c.key.clone(),
                features,
                model: Model::Majority(MajorityModel::fit(&data)),
                fallback: true,
            });
        }
        let model = match c.bagging {
            Some(r) => Model::Bagged(bag_with(
                &c.learner,
                &data,
                component_seed(self.seed, &c.key),
                r,
                self.exec,
            )?),
            None => c.learner.train(&data)?,
        };
        Ok(TrainedComponent {
            key: c.key.clone(),
            features,
            model,
            fallback: false,
        })
    }

    fn pipeline(&mut self, p: &Pipeline) -> Result<TrainedPipeline> {
        Ok(match p {
            Pipeline::Single(c) => TrainedPipeline::Single(self.component(c).map_err(|e| e.context(c.key.clone()))?),
            Pipeline::Vote { mode, members } => TrainedPipeline::Vote {
                mode: *mode,
                members: members.iter().map(|m| self.pipeline(m)).collect::<Result<_>>()?,
            },
        })
    }
}

/// Selects features from the training split only and trains every component.
pub fn train_system(
    cfg: &SystemConfig,
    ds: &LexeltDataset,
    stoplist: &StopList,
    seed: u64,
    exec: Exec,
) -> Result<TrainedSystem> {
    if ds.train.is_empty() {
        return Err(Error::EmptyTrainingSet.context(format!("{} on {}", cfg.name, ds.lexelt)));
    }
    let mut trainer = Trainer {
        ds,
        stoplist,
        seed,
        exec,
        selected: HashMap::new(),
    };
    let pipeline = trainer.pipeline(&cfg.pipeline)?;
    Ok(TrainedSystem {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        system: cfg.name.clone(),
        lexelt: ds.lexelt.clone(),
        seed,
        config_digest: cfg.digest(),
        pipeline,
    })
}

enum Compiled<'a> {
    Single(Featurizer, &'a Model),
    Vote(VoteMode, Vec<Compiled<'a>>),
}

impl<'a> Compiled<'a> {
    fn new(p: &'a TrainedPipeline) -> Self {
        match p {
            TrainedPipeline::Single(c) => Compiled::Single(Featurizer::new(&c.features), &c.model),
            TrainedPipeline::Vote { mode, members } => {
                Compiled::Vote(*mode, members.iter().map(Compiled::new).collect())
            }
        }
    }

    fn decide(&self, inst: &Instance) -> Result<Decision> {
        match self {
            Compiled::Single(fz, model) => Ok(Decision::from_distribution(model.predict(&fz.bits(inst))?)),
            Compiled::Vote(mode, members) => {
                let ds = members.iter().map(|m| m.decide(inst)).collect::<Result<Vec<_>>>()?;
                combine(*mode, &ds)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerMeta {
    pub seed: u64,
    pub config_digest: String,
    pub rng: String,
    /// Components that fell back to the majority baseline.
    pub fallbacks: Vec<String>,
}

/// Predictions of one system for one lexelt's test instances, keyed by
/// instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub system: String,
    pub lexelt: String,
    pub entries: BTreeMap<String, Decision>,
    pub metadata: AnswerMeta,
}

impl AnswerSet {
    pub fn sense(&self, instance_id: &str) -> Option<&str> {
        self.entries.get(instance_id).map(|d| d.sense.as_str())
    }
}

/// Tags `instances` with a trained system.
pub fn apply_system(trained: &TrainedSystem, instances: &[Instance], exec: Exec) -> Result<AnswerSet> {
    let compiled = Compiled::new(&trained.pipeline);
    let decisions = exec.try_map(instances, |inst| {
        compiled
            .decide(inst)
            .map_err(|e| e.context(format!("instance {}", inst.instance_id)))
    });
    // `Compiled` borrows models immutably; sharing across threads only reads.
    let decisions = decisions?;
    Ok(AnswerSet {
        system: trained.system.clone(),
        lexelt: trained.lexelt.clone(),
        entries: instances.iter().map(|i| i.instance_id.clone()).zip(decisions).collect(),
        metadata: AnswerMeta {
            seed: trained.seed,
            config_digest: trained.config_digest.clone(),
            rng: RNG_DESCRIPTION.to_string(),
            fallbacks: trained.fallbacks(),
        },
    })
}

pub fn run_system(cfg: &SystemConfig, ds: &LexeltDataset, stoplist: &StopList, seed: u64) -> Result<AnswerSet> {
    run_system_with(cfg, ds, stoplist, seed, Exec::default())
}

pub fn run_system_with(
    cfg: &SystemConfig,
    ds: &LexeltDataset,
    stoplist: &StopList,
    seed: u64,
    exec: Exec,
) -> Result<AnswerSet> {
    let trained = train_system(cfg, ds, stoplist, seed, exec)?;
    apply_system(&trained, &ds.test, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn inst(id: &str, words: &str, target: usize, sense: &str) -> Instance {
        Instance {
            lexelt: "bank.n".into(),
            instance_id: id.into(),
            gold_senses: if sense.is_empty() { vec![] } else { vec![sense.into()] },
            tokens: words.split_whitespace().map(|w| Token::new(w).unwrap()).collect(),
            target_index: target,
        }
    }

    #[test]
    fn registry_parameterizations() {
        let c = build_system("duluth4", Language::Es).unwrap_err();
        assert!(matches!(c, Error::UnknownSystem { .. }));
        let c = build_system("duluth9", Language::Es).unwrap();
        match &c.pipeline {
            Pipeline::Single(comp) => assert_eq!(comp.features, vec![FeatureSpec::unigrams(2)]),
            p => panic!("{p:?}"),
        }
        let c = build_system("duluthX", Language::Es).unwrap();
        for comp in c.pipeline.components() {
            assert_eq!(comp.features[0].g2_min, Some(0.0));
            assert_eq!(comp.features[0].max_gap, 2);
        }
        let c = build_system("duluth3", Language::En).unwrap();
        assert_eq!(c.combine(), Combine::Majority);
        assert_eq!(c.pipeline.components().len(), 3);
        assert!(c.pipeline.components().iter().all(|c| c.bagging == Some(10)));
        let c = build_system("DULUTHc", Language::En).unwrap();
        assert_eq!(c.name, "duluthC");
        assert_eq!(c.combine(), Combine::Weighted);
        assert_eq!(c.pipeline.components().len(), 3 + 1 + 3 + 1 + 1 + 3 + 1);
        assert!(build_system("duluth11", Language::En).is_err());
    }

    #[test]
    fn english_and_spanish_differ_only_where_stated() {
        for (en, es) in ENGLISH_SYSTEMS.iter().zip(SPANISH_SYSTEMS) {
            let a = build_system(en, Language::En).unwrap();
            let b = build_system(es, Language::Es).unwrap();
            let fa: Vec<_> = a
                .pipeline
                .components()
                .iter()
                .map(|c| (c.features.clone(), c.learner.clone(), c.bagging))
                .collect();
            let fb: Vec<_> = b
                .pipeline
                .components()
                .iter()
                .map(|c| (c.features.clone(), c.learner.clone(), c.bagging))
                .collect();
            let differs = ["duluth4", "duluthA", "duluthC"].contains(en);
            assert_eq!(fa != fb, differs, "{en}/{es}");
        }
    }

    #[test]
    fn overrides() {
        let mut c = build_system("duluth1", Language::En).unwrap();
        assert_eq!(c.apply_override("bigram.g2_min", "3.841").unwrap(), 1);
        assert_eq!(c.apply_override("cooccurrence.min_freq", "3").unwrap(), 1);
        assert!(c.apply_override("unigram.g2_min", "1").is_err());
        assert!(c.apply_override("bigram.g2_min", "-1").is_err());
        assert!(c.apply_override("nonsense", "1").is_err());
        let mut c = build_system("duluthC", Language::En).unwrap();
        assert_eq!(c.apply_override("bagging.replicates", "3").unwrap(), 3 + 1 + 1 + 1);
        assert_eq!(c.apply_override("knn.k", "3").unwrap(), 1);
        assert_eq!(c.apply_override("tree.confidence", "0.1").unwrap(), 3 + 1 + 1 + 1 + 1);
        assert!(c.apply_override("tree.depth", "1").is_err());
    }

    fn tiny() -> LexeltDataset {
        let mut ds = LexeltDataset::new("bank.n");
        for i in 0..12 {
            let (w, s) = if i % 2 == 0 {
                ("river", "shore")
            } else {
                ("savings", "money")
            };
            ds.train
                .push(inst(&format!("tr{i}"), &format!("the {w} bank was x{i}"), 2, s));
        }
        ds.test.push(inst("te1", "the river bank", 2, ""));
        ds.test.push(inst("te2", "the savings bank", 2, ""));
        ds
    }

    #[test]
    fn every_system_tags_every_instance() {
        let ds = tiny();
        for name in ENGLISH_SYSTEMS {
            let cfg = build_system(name, Language::En).unwrap();
            let a = run_system(&cfg, &ds, &StopList::empty(), 42).unwrap();
            assert_eq!(a.entries.len(), 2, "{name}");
            for d in a.entries.values() {
                assert!(d.distribution.contains(&d.sense));
            }
            assert_eq!(a.sense("te1"), Some("shore"), "{name}");
            assert_eq!(a.sense("te2"), Some("money"), "{name}");
        }
    }

    #[test]
    fn single_sense_and_fallback() {
        let mut ds = LexeltDataset::new("bank.n");
        ds.train.push(inst("a", "bank", 0, "only"));
        ds.test.push(inst("b", "the bank", 1, ""));
        for name in ENGLISH_SYSTEMS {
            let cfg = build_system(name, Language::En).unwrap();
            let a = run_system(&cfg, &ds, &StopList::empty(), 1).unwrap();
            assert_eq!(a.sense("b"), Some("only"));
        }
        let cfg = build_system("duluth2", Language::En).unwrap();
        let a = run_system(&cfg, &ds, &StopList::empty(), 1).unwrap();
        assert_eq!(a.metadata.fallbacks, vec!["duluth2".to_string()]);
    }

    #[test]
    fn empty_training_split_is_an_error() {
        let cfg = build_system("duluth4", Language::En).unwrap();
        assert!(run_system(&cfg, &LexeltDataset::new("x"), &StopList::empty(), 1).is_err());
    }

    #[test]
    fn combined_system_reuses_member_training() {
        let ds = tiny();
        let c = run_system(
            &build_system("duluthC", Language::En).unwrap(),
            &ds,
            &StopList::empty(),
            5,
        )
        .unwrap();
        let members: Vec<AnswerSet> = ENGLISH_SYSTEMS[..7]
            .iter()
            .map(|n| run_system(&build_system(n, Language::En).unwrap(), &ds, &StopList::empty(), 5).unwrap())
            .collect();
        for (id, d) in &c.entries {
            let dists: Vec<_> = members.iter().map(|m| m.entries[id].distribution.clone()).collect();
            let expect = crate::ensemble::weighted_vote(&dists).unwrap();
            assert_eq!(d.distribution, expect);
        }
    }

    #[test]
    fn trained_system_round_trip() {
        let ds = tiny();
        let cfg = build_system("duluthA", Language::En).unwrap();
        let t = train_system(&cfg, &ds, &StopList::empty(), 3, Exec::default()).unwrap();
        let back = TrainedSystem::from_json(&t.to_json()).unwrap();
        assert_eq!(
            apply_system(&t, &ds.test, Exec::Sequential).unwrap(),
            apply_system(&back, &ds.test, Exec::Parallel).unwrap()
        );
        let mut bad = t.clone();
        bad.version = 99;
        assert!(TrainedSystem::from_json(&bad.to_json()).is_err());
    }

    #[test]
    fn component_seeds_differ_by_key() {
        assert_ne!(component_seed(42, "duluth2"), component_seed(42, "duluth5"));
        assert_eq!(component_seed(42, "duluth2"), component_seed(42, "duluth2"));
    }
}
