//! Declarative experiment runs: a TOML manifest names the data, systems,
//! seed and overrides; the run writes answer files and a report under the
//! output directory.
//!
//! ```toml
//! language = "en"
//! systems = ["duluth3", "duluthB"]   # default: all eight
//! data = ["lexelts.jsonl"]
//! key = "key.txt"                    # default: gold senses of test records
//! seed = 42
//! stoplist = "stop.txt"              # default: induced from the training data
//! out = "out"
//! jobs = 4                           # default: all cores
//!
//! [overrides]
//! "bigram.g2_min" = 3.841            # every system
//! "duluth3:tree.confidence" = 0.1    # one system
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_canonical_all, LexeltDataset};
use crate::error::{Error, Result};
use crate::eval::{agreement, score_predictions, write_answers, AgreementReport, KeySet, Predictions, Score};
use crate::exec::Exec;
use crate::stoplist::{build_stoplist, StopList, DEFAULT_MIN_COUNT, DEFAULT_SAMPLE_SIZE};
use crate::systems::{build_system, run_system_with, Language, SystemConfig};

pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub language: Language,
    #[serde(default)]
    pub systems: Vec<String>,
    pub data: Vec<PathBuf>,
    #[serde(default)]
    pub key: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub stoplist: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub overrides: BTreeMap<String, toml::Value>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Reads a manifest; relative paths in it resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.rebase(base);
        Ok(m)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.data.iter_mut().for_each(join);
        self.key.iter_mut().for_each(join);
        self.stoplist.iter_mut().for_each(join);
        join(&mut self.out);
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::Validation("manifest lists no data files".into()));
        }
        for s in &self.systems {
            build_system(s, self.language)?;
        }
        let names = self.system_names();
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::Validation("manifest lists a system twice".into()));
        }
        for (k, v) in &self.overrides {
            override_value(v)
                .ok_or_else(|| Error::Validation(format!("override {k} must be a string, number or bool")))?;
        }
        Ok(())
    }

    /// Canonical registry names, in manifest order (registry order by default).
    pub fn system_names(&self) -> Vec<String> {
        if self.systems.is_empty() {
            self.language.system_names().iter().map(|s| s.to_string()).collect()
        } else {
            self.systems
                .iter()
                .map(|s| {
                    build_system(s, self.language)
                        .map(|c| c.name)
                        .unwrap_or_else(|_| s.clone())
                })
                .collect()
        }
    }

    /// Applies a `key=value` override given on the command line.
    pub fn add_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("override {assignment:?} is not key=value")))?;
        self.overrides
            .insert(k.trim().to_string(), toml::Value::String(v.trim().to_string()));
        Ok(())
    }

    /// Effective system configurations with overrides applied.
    pub fn system_configs(&self) -> Result<Vec<SystemConfig>> {
        let mut configs = self
            .system_names()
            .iter()
            .map(|n| build_system(n, self.language))
            .collect::<Result<Vec<_>>>()?;
        for (key, value) in &self.overrides {
            let value = override_value(value).expect("validated");
            let (only, param) = match key.split_once(':') {
                Some((sys, param)) => (Some(sys), param),
                None => (None, key.as_str()),
            };
            let mut changed = 0;
            for c in configs
                .iter_mut()
                .filter(|c| only.is_none_or(|s| s.eq_ignore_ascii_case(&c.name)))
            {
                changed += c.apply_override(param, &value)?;
            }
            if changed == 0 {
                log::warn!("override {key} matched nothing in the selected systems");
            }
        }
        Ok(configs)
    }
}

fn override_value(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Digest of everything that determines the outputs: seed, systems,
/// effective configurations, and the contents of every input file. Output
/// location and worker count are excluded.
pub fn manifest_digest(m: &Manifest) -> Result<String> {
    let mut h = Sha256::new();
    let configs = m.system_configs()?;
    h.update(serde_json::to_vec(&(m.language, m.seed, &configs)).expect("serializable"));
    for p in &m.data {
        h.update(b"data:");
        h.update(file_digest(p)?);
    }
    for (tag, p) in [("key:", &m.key), ("stoplist:", &m.stoplist)] {
        if let Some(p) = p {
            h.update(tag);
            h.update(file_digest(p)?);
        }
    }
    Ok(hex::encode(&h.finalize()[..16]))
}

pub fn load_datasets(paths: &[PathBuf]) -> Result<Vec<LexeltDataset>> {
    let mut out: Vec<LexeltDataset> = Vec::new();
    for p in paths {
        for ds in read_canonical_all(p)? {
            if out.iter().any(|d| d.lexelt == ds.lexelt) {
                return Err(Error::Validation(format!(
                    "lexelt {} appears in more than one data file",
                    ds.lexelt
                )));
            }
            ds.validate().map_err(|e| e.context(p.display().to_string()))?;
            out.push(ds);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub system: String,
    pub instances: usize,
    pub score: Option<Score>,
    pub fallbacks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub digest: String,
    pub language: Language,
    pub seed: u64,
    pub stoplist_id: String,
    pub stoplist_size: usize,
    pub lexelts: Vec<String>,
    pub systems: Vec<SystemResult>,
    pub agreement: Option<AgreementReport>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "manifest digest: {}", self.digest).unwrap();
        writeln!(out, "language: {}  seed: {}", self.language, self.seed).unwrap();
        writeln!(out, "stoplist: {} ({} words)", self.stoplist_id, self.stoplist_size).unwrap();
        writeln!(out, "lexelts: {}", self.lexelts.len()).unwrap();
        writeln!(out).unwrap();
        writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>8}",
            "system", "correct", "answered", "accuracy"
        )
        .unwrap();
        for s in &self.systems {
            match &s.score {
                Some(sc) => writeln!(
                    out,
                    "{:<10} {:>9} {:>9} {:>8.3}",
                    s.system, sc.correct, sc.total, sc.accuracy
                ),
                None => writeln!(out, "{:<10} {:>9} {:>9} {:>8}", s.system, "-", s.instances, "-"),
            }
            .unwrap();
        }
        for s in self.systems.iter().filter(|s| !s.fallbacks.is_empty()) {
            writeln!(
                out,
                "note: {} fell back to the majority sense in {} component(s)",
                s.system,
                s.fallbacks.len()
            )
            .unwrap();
        }
        if let Some(a) = &self.agreement {
            writeln!(out).unwrap();
            out.push_str(&a.to_text());
        }
        out
    }
}

/// Loads or induces the stoplist for a manifest.
pub fn resolve_stoplist(m: &Manifest, datasets: &[LexeltDataset]) -> Result<StopList> {
    match &m.stoplist {
        Some(p) => StopList::read(p),
        None => build_stoplist(datasets, m.seed, DEFAULT_SAMPLE_SIZE, DEFAULT_MIN_COUNT),
    }
}

/// Runs every (system, lexelt) unit and writes
/// `out/answers/<system>/<lexelt>.ans`, `out/report.txt` and
/// `out/summary.json`.
pub fn run_experiment(m: &Manifest, exec: Exec) -> Result<RunSummary> {
    m.validate()?;
    let digest = manifest_digest(m)?;
    let datasets = load_datasets(&m.data)?;
    let stoplist = resolve_stoplist(m, &datasets)?;
    let configs = m.system_configs()?;
    let units: Vec<(&SystemConfig, &LexeltDataset)> = configs
        .iter()
        .flat_map(|c| datasets.iter().map(move |d| (c, d)))
        .collect();
    log::info!(
        "running {} units ({} systems x {} lexelts)",
        units.len(),
        configs.len(),
        datasets.len()
    );
    let answers = exec.install(m.jobs, || {
        exec.try_map(&units, |(cfg, ds)| {
            run_system_with(cfg, ds, &stoplist, m.seed, exec)
                .map_err(|e| e.context(format!("system {} on lexelt {}", cfg.name, ds.lexelt)))
        })
    })?;

    let key = match &m.key {
        Some(p) => Some(KeySet::read(p)?),
        None => Some(KeySet::from_datasets(&datasets)).filter(|k| !k.is_empty()),
    };

    let answer_root = m.out.join("answers");
    let mut predictions = Vec::new();
    let mut results = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let dir = answer_root.join(&cfg.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let sets = &answers[i * datasets.len()..(i + 1) * datasets.len()];
        for a in sets {
            write_answers(a, dir.join(format!("{}.ans", a.lexelt)))?;
        }
        let p = Predictions::from_answer_sets(cfg.name.clone(), sets);
        let score = key.as_ref().map(|k| score_predictions(&p, k)).transpose()?;
        results.push(SystemResult {
            system: cfg.name.clone(),
            instances: p.len(),
            score,
            fallbacks: sets
                .iter()
                .flat_map(|a| a.metadata.fallbacks.iter().map(|f| format!("{}:{f}", a.lexelt)))
                .collect(),
        });
        predictions.push(p);
    }
    let agreement = match &key {
        Some(k) if predictions.len() >= 2 => Some(agreement(&predictions, k)?),
        _ => None,
    };
    let summary = RunSummary {
        digest,
        language: m.language,
        seed: m.seed,
        stoplist_id: stoplist.id(),
        stoplist_size: stoplist.len(),
        lexelts: datasets.iter().map(|d| d.lexelt.clone()).collect(),
        systems: results,
        agreement,
    };
    let report = m.out.join("report.txt");
    fs::write(&report, summary.to_text()).map_err(|e| Error::io(&report, e))?;
    let json = m.out.join("summary.json");
    fs::write(
        &json,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )
    .map_err(|e| Error::io(&json, e))?;
    Ok(summary)
}

fn ans_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "ans") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads answer files under `dir`. A directory holding `.ans` files is one
/// system named after the directory; otherwise each subdirectory holding
/// `.ans` files is one system.
pub fn load_answer_tree(dir: impl AsRef<Path>) -> Result<Vec<Predictions>> {
    let dir = dir.as_ref();
    let name_of = |d: &Path| {
        d.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let read = |d: &Path, files: Vec<PathBuf>| -> Result<Predictions> {
        let mut p = Predictions::new(name_of(d));
        for f in files {
            crate::eval::read_answers_into(&f, &mut p)?;
        }
        Ok(p)
    };
    let direct = ans_files(dir)?;
    if !direct.is_empty() {
        return Ok(vec![read(dir, direct)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for d in subdirs {
        let files = ans_files(&d)?;
        if !files.is_empty() {
            out.push(read(&d, files)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("no .ans files under {}", dir.display())));
    }
    Ok(out)
}
