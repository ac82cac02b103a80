//! Fine-grained scoring, answer files and agreement between systems.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LexeltDataset;
use crate::error::{Error, Result};
use crate::systems::AnswerSet;

/// (lexelt, instance id)
pub type InstanceKey = (String, String);

/// Acceptable senses per test instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySet {
    entries: BTreeMap<InstanceKey, BTreeSet<String>>,
}

impl KeySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<I, S>(&mut self, lexelt: &str, instance_id: &str, senses: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let senses: BTreeSet<String> = senses.into_iter().map(Into::into).collect();
        if senses.is_empty() {
            return Err(Error::Validation(format!(
                "key for {lexelt} {instance_id} has no senses"
            )));
        }
        self.entries
            .insert((lexelt.to_string(), instance_id.to_string()), senses);
        Ok(())
    }

    pub fn get(&self, lexelt: &str, instance_id: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(&(lexelt.to_string(), instance_id.to_string()))
    }

    pub fn is_correct(&self, lexelt: &str, instance_id: &str, sense: &str) -> Option<bool> {
        self.get(lexelt, instance_id).map(|s| s.contains(sense))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InstanceKey, &BTreeSet<String>)> {
        self.entries.iter()
    }

    /// Keys from the gold senses of labeled test instances.
    pub fn from_datasets(datasets: &[LexeltDataset]) -> Self {
        let mut key = KeySet::new();
        for ds in datasets {
            for inst in ds.test.iter().filter(|i| !i.gold_senses.is_empty()) {
                key.insert(&ds.lexelt, &inst.instance_id, inst.gold_senses.iter().cloned())
                    .expect("non-empty");
            }
        }
        key
    }

    /// Parses `lexelt instance_id sense [sense ...]` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut key = KeySet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(lexelt), Some(id)) = (fields.next(), fields.next()) else {
                return Err(Error::parse(origin, n + 1, "expected: lexelt instance_id sense..."));
            };
            let senses: Vec<&str> = fields.collect();
            if senses.is_empty() {
                return Err(Error::parse(origin, n + 1, format!("no senses for {lexelt} {id}")));
            }
            if key.get(lexelt, id).is_some() {
                return Err(Error::parse(origin, n + 1, format!("duplicate key for {lexelt} {id}")));
            }
            key.insert(lexelt, id, senses)?;
        }
        Ok(key)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((lexelt, id), senses) in &self.entries {
            let senses: Vec<&str> = senses.iter().map(String::as_str).collect();
            writeln!(out, "{lexelt} {id} {}", senses.join(" ")).unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// One system's predicted sense per instance, possibly across lexelts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictions {
    pub system: String,
    pub senses: BTreeMap<InstanceKey, String>,
}

impl Predictions {
    pub fn new(system: impl Into<String>) -> Self {
        Predictions {
            system: system.into(),
            senses: BTreeMap::new(),
        }
    }

    pub fn from_answer_sets(system: impl Into<String>, sets: &[AnswerSet]) -> Self {
        let mut p = Predictions::new(system);
        for a in sets {
            p.add(a);
        }
        p
    }

    pub fn add(&mut self, a: &AnswerSet) {
        for (id, d) in &a.entries {
            self.senses.insert((a.lexelt.clone(), id.clone()), d.sense.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

impl Score {
    fn new(correct: u64, total: u64) -> Self {
        Score {
            correct,
            total,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        }
    }
}

fn correctness(p: &Predictions, key: &KeySet) -> Result<BTreeMap<InstanceKey, bool>> {
    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    for ((lexelt, id), sense) in &p.senses {
        match key.is_correct(lexelt, id, sense) {
            Some(ok) => {
                out.insert((lexelt.clone(), id.clone()), ok);
            }
            None => missing.push(format!("{lexelt} {id}")),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingKey(missing))
    }
}

/// Correct iff the predicted sense is one of the key's senses; accuracy is
/// over all answered instances. Answered instances without a key entry are
/// an error.
pub fn score_predictions(p: &Predictions, key: &KeySet) -> Result<Score> {
    let c = correctness(p, key)?;
    Ok(Score::new(c.values().filter(|&&ok| ok).count() as u64, c.len() as u64))
}

pub fn score(answers: &[AnswerSet], key: &KeySet) -> Result<Score> {
    score_predictions(&Predictions::from_answer_sets("", answers), key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    pub correct: u64,
    pub accuracy: f64,
}

/// Instances bucketed by how many systems tagged them correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub systems: Vec<String>,
    pub total: u64,
    /// `by_correct_count[k]` = instances exactly `k` systems got right.
    pub by_correct_count: Vec<u64>,
    pub optimal_accuracy: f64,
    /// Empty when the report was built from counts alone.
    pub per_system: Vec<SystemScore>,
}

impl AgreementReport {
    /// Builds a report from partition counts, indexed by number of systems correct.
    pub fn from_counts(systems: Vec<String>, by_correct_count: Vec<u64>) -> Result<Self> {
        if systems.is_empty() {
            return Err(Error::InvalidParameter("agreement needs at least one system".into()));
        }
        if by_correct_count.len() != systems.len() + 1 {
            return Err(Error::LengthMismatch {
                expected: systems.len() + 1,
                found: by_correct_count.len(),
            });
        }
        let total: u64 = by_correct_count.iter().sum();
        let optimal_accuracy = if total == 0 {
            0.0
        } else {
            (total - by_correct_count[0]) as f64 / total as f64
        };
        Ok(AgreementReport {
            systems,
            total,
            by_correct_count,
            optimal_accuracy,
            per_system: Vec::new(),
        })
    }

    pub fn all_correct(&self) -> u64 {
        *self.by_correct_count.last().expect("non-empty")
    }

    pub fn none_correct(&self) -> u64 {
        self.by_correct_count[0]
    }

    /// Fraction of instances exactly `k` systems got right.
    pub fn share(&self, k: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.by_correct_count[k] as f64 / self.total as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n = self.systems.len();
        writeln!(out, "systems: {}", self.systems.join(" ")).unwrap();
        writeln!(out, "instances: {}", self.total).unwrap();
        writeln!(out, "{:>8}  {:>8}  {:>7}", "correct", "count", "share").unwrap();
        for k in (0..=n).rev() {
            let label = match k {
                k if k == n => "all".to_string(),
                0 => "none".to_string(),
                k => k.to_string(),
            };
            writeln!(
                out,
                "{label:>8}  {:>8}  {:>6.1}%",
                self.by_correct_count[k],
                100.0 * self.share(k)
            )
            .unwrap();
        }
        for s in &self.per_system {
            writeln!(out, "accuracy {:<12} {:.3}", s.system, s.accuracy).unwrap();
        }
        writeln!(
            out,
            "optimal combination: {:.3} ({:.0}%)",
            self.optimal_accuracy,
            100.0 * self.optimal_accuracy
        )
        .unwrap();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Agreement over systems answering the same instances.
pub fn agreement(systems: &[Predictions], key: &KeySet) -> Result<AgreementReport> {
    let first = systems
        .first()
        .ok_or_else(|| Error::InvalidParameter("agreement needs at least one system".into()))?;
    let marks = systems
        .iter()
        .map(|p| correctness(p, key).map_err(|e| e.context(format!("system {}", p.system))))
        .collect::<Result<Vec<_>>>()?;
    for (p, m) in systems.iter().zip(&marks).skip(1) {
        if !m.keys().eq(marks[0].keys()) {
            let a: BTreeSet<_> = marks[0].keys().collect();
            let b: BTreeSet<_> = m.keys().collect();
            let diff = a.symmetric_difference(&b).count();
            return Err(Error::CoverageMismatch(format!(
                "{} and {} differ on {diff} instances",
                first.system, p.system
            )));
        }
    }
    let mut counts = vec![0u64; systems.len() + 1];
    for k in marks[0].keys() {
        counts[marks.iter().filter(|m| m[k]).count()] += 1;
    }
    let mut report = AgreementReport::from_counts(systems.iter().map(|p| p.system.clone()).collect(), counts)?;
    report.per_system = systems
        .iter()
        .zip(&marks)
        .map(|(p, m)| {
            let s = Score::new(m.values().filter(|&&ok| ok).count() as u64, m.len() as u64);
            SystemScore {
                system: p.system.clone(),
                correct: s.correct,
                accuracy: s.accuracy,
            }
        })
        .collect();
    Ok(report)
}

/// `lexelt instance_id sense` per line, sorted by instance id.
pub fn answers_to_text(a: &AnswerSet) -> String {
    let mut out = String::new();
    for (id, d) in &a.entries {
        writeln!(out, "{} {id} {}", a.lexelt, d.sense).unwrap();
    }
    out
}

pub fn write_answers(a: &AnswerSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, answers_to_text(a)).map_err(|e| Error::io(path, e))
}

/// Reads an answer file into `into`. Only the first sense on a line is used.
pub fn read_answers_into(path: impl AsRef<Path>, into: &mut Predictions) -> Result<()> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 3 {
            return Err(Error::parse(path, n + 1, "expected: lexelt instance_id sense"));
        }
        let k = (f[0].to_string(), f[1].to_string());
        if into.senses.insert(k, f[2].to_string()).is_some() {
            return Err(Error::parse(
                path,
                n + 1,
                format!("duplicate answer for {} {}", f[0], f[1]),
            ));
        }
    }
    Ok(())
}

pub fn read_answers(path: impl AsRef<Path>) -> Result<Predictions> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut p = Predictions::new(name);
    read_answers_into(path, &mut p)?;
    Ok(p)
}
