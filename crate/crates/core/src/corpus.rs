//! Sense-tagged lexical-sample data: tokens, instances, per-lexelt datasets
//! and the readers/writers for the canonical JSON Lines format and the
//! lexical-sample XML distribution format.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized word. Never empty and never contains whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Option<Token> {
        let s = surface.into();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            None
        } else {
            Some(Token(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        Token::new(s.clone()).ok_or_else(|| format!("invalid token {s:?}"))
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl Deref for Token {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub language: String,
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub keep_numbers: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig::for_language("en")
    }
}

impl TokenizerConfig {
    /// English and Spanish share the same rules; only the tag differs.
    pub fn for_language(language: &str) -> Self {
        TokenizerConfig {
            language: language.to_string(),
            lowercase: true,
            strip_punctuation: true,
            keep_numbers: true,
        }
    }
}

/// Splits on whitespace, trims non-alphanumeric characters from both ends of
/// each piece (dropping pieces that were pure punctuation), optionally
/// case-folds and optionally drops purely numeric tokens.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<Token> {
    text.split_whitespace()
        .filter_map(|raw| {
            let piece = if config.strip_punctuation {
                raw.trim_matches(|c: char| !c.is_alphanumeric())
            } else {
                raw
            };
            if !config.keep_numbers && piece.chars().all(|c| c.is_numeric()) {
                return None;
            }
            let piece = if config.lowercase {
                piece.to_lowercase()
            } else {
                piece.to_string()
            };
            Token::new(piece)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One occurrence of a target word in context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub lexelt: String,
    pub instance_id: String,
    /// Acceptable senses, in source order. The first one is the training
    /// label; empty for unlabeled test data.
    pub gold_senses: Vec<String>,
    pub tokens: Vec<Token>,
    pub target_index: usize,
}

impl Instance {
    pub fn target(&self) -> &Token {
        &self.tokens[self.target_index]
    }

    pub fn primary_sense(&self) -> Option<&str> {
        self.gold_senses.first().map(String::as_str)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.target_index >= self.tokens.len() {
            return Err(format!(
                "instance {}: target_index {} out of range for {} tokens",
                self.instance_id,
                self.target_index,
                self.tokens.len()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexeltDataset {
    pub lexelt: String,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl LexeltDataset {
    pub fn new(lexelt: impl Into<String>) -> Self {
        LexeltDataset {
            lexelt: lexelt.into(),
            ..Default::default()
        }
    }

    /// Checks the dataset invariants: shared lexelt, valid target positions,
    /// labelled training instances and unique instance ids across both splits.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (split, inst) in self.instances() {
            if inst.lexelt != self.lexelt {
                return Err(Error::Validation(format!(
                    "instance {} belongs to {} not {}",
                    inst.instance_id, inst.lexelt, self.lexelt
                )));
            }
            inst.check().map_err(Error::Validation)?;
            if split == Split::Train && inst.gold_senses.is_empty() {
                return Err(Error::Validation(format!(
                    "training instance {} has no sense",
                    inst.instance_id
                )));
            }
            if !seen.insert(inst.instance_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate instance id {} in {}",
                    inst.instance_id, self.lexelt
                )));
            }
        }
        Ok(())
    }

    pub fn instances(&self) -> impl Iterator<Item = (Split, &Instance)> {
        self.train
            .iter()
            .map(|i| (Split::Train, i))
            .chain(self.test.iter().map(|i| (Split::Test, i)))
    }

    /// Number of tokens over the training split.
    pub fn train_token_count(&self) -> usize {
        self.train.iter().map(|i| i.tokens.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    lexelt: String,
    id: String,
    split: Split,
    senses: Vec<String>,
    tokens: Vec<Token>,
    target_index: usize,
}

/// Reads a canonical file holding exactly one lexelt (or none).
pub fn read_canonical(path: impl AsRef<Path>) -> Result<LexeltDataset> {
    let path = path.as_ref();
    let mut all = read_canonical_all(path)?;
    match all.len() {
        0 => Ok(LexeltDataset::default()),
        1 => Ok(all.remove(0)),
        n => Err(Error::Validation(format!(
            "{} holds {n} lexelts; use read_canonical_all",
            path.display()
        ))),
    }
}

/// Reads a canonical file that may interleave several lexelts. Datasets come
/// back in order of first appearance; instance order within a split is kept.
pub fn read_canonical_all(path: impl AsRef<Path>) -> Result<Vec<LexeltDataset>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut datasets: Vec<LexeltDataset> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let inst = Instance {
            lexelt: rec.lexelt,
            instance_id: rec.id,
            gold_senses: rec.senses,
            tokens: rec.tokens,
            target_index: rec.target_index,
        };
        inst.check().map_err(|m| Error::parse(path, lineno, m))?;
        let slot = *index.entry(inst.lexelt.clone()).or_insert_with(|| {
            datasets.push(LexeltDataset::new(inst.lexelt.clone()));
            datasets.len() - 1
        });
        match rec.split {
            Split::Train => datasets[slot].train.push(inst),
            Split::Test => datasets[slot].test.push(inst),
        }
    }
    for ds in &datasets {
        ds.validate().map_err(|e| e.context(path.display().to_string()))?;
    }
    Ok(datasets)
}

/// Writes training records then test records, one compact JSON object per line.
pub fn write_canonical(ds: &LexeltDataset, path: impl AsRef<Path>) -> Result<()> {
    write_canonical_all(std::slice::from_ref(ds), path)
}

pub fn write_canonical_all(datasets: &[LexeltDataset], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ds in datasets {
        write_records(ds, &mut w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_records(ds: &LexeltDataset, w: &mut impl Write) -> std::io::Result<()> {
    for (split, inst) in ds.instances() {
        let rec = Record {
            lexelt: inst.lexelt.clone(),
            id: inst.instance_id.clone(),
            split,
            senses: inst.gold_senses.clone(),
            tokens: inst.tokens.clone(),
            target_index: inst.target_index,
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// How XML instances are assigned to a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPolicy {
    Train,
    Test,
    /// Instances with at least one answer are training data, others test.
    ByAnswers,
}

#[derive(Debug, Default)]
pub struct XmlImport {
    pub datasets: Vec<LexeltDataset>,
    /// `(instance id, reason)` for every instance that could not be used.
    pub skipped: Vec<(String, String)>,
}

#[derive(Default)]
struct PendingInstance {
    id: String,
    answers: Vec<String>,
    before: String,
    head: String,
    after: String,
    heads_seen: usize,
    in_head: bool,
}

impl PendingInstance {
    fn push_text(&mut self, text: &str) {
        let seg = if self.in_head {
            &mut self.head
        } else if self.heads_seen == 0 {
            &mut self.before
        } else {
            &mut self.after
        };
        seg.push_str(text);
    }
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<Option<String>> {
    match e.try_get_attribute(name) {
        Ok(Some(a)) => a
            .unescape_value()
            .map(|v| Some(v.into_owned()))
            .map_err(|err| Error::Xml(err.to_string())),
        Ok(None) => Ok(None),
        Err(err) => Err(Error::Xml(err.to_string())),
    }
}

/// Reads a lexical-sample XML document (`lexelt` / `instance` / `answer` /
/// `context` / `head` elements). Only the first `head` of an instance marks
/// the target; other markup inside `context` is dropped and its text kept.
pub fn read_senseval_xml(path: impl AsRef<Path>, config: &TokenizerConfig, policy: SplitPolicy) -> Result<XmlImport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_senseval_xml(&text, config, policy).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_senseval_xml(text: &str, config: &TokenizerConfig, policy: SplitPolicy) -> Result<XmlImport> {
    let mut reader = quick_xml::Reader::from_str(text);
    reader.config_mut().trim_text(false);

    let mut out = XmlImport::default();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut lexelt: Option<String> = None;
    let mut pending: Option<PendingInstance> = None;
    let mut in_context = false;

    let xml_err = |reader: &quick_xml::Reader<&[u8]>, e: &dyn fmt::Display| {
        Error::Xml(format!("at byte {}: {e}", reader.buffer_position()))
    };

    loop {
        let event = reader.read_event().map_err(|e| xml_err(&reader, &e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                match e.local_name().as_ref() {
                    b"lexelt" => lexelt = attr(e, "item")?,
                    b"instance" if !is_empty => {
                        let id = attr(e, "id")?.ok_or_else(|| xml_err(&reader, &"instance without id"))?;
                        pending = Some(PendingInstance {
                            id,
                            ..Default::default()
                        });
                    }
                    b"answer" => {
                        if let (Some(p), Some(s)) = (pending.as_mut(), attr(e, "senseid")?) {
                            p.answers.push(s);
                        }
                    }
                    b"context" if !is_empty => in_context = true,
                    b"head" if in_context && !is_empty => {
                        if let Some(p) = pending.as_mut() {
                            if p.heads_seen == 0 {
                                p.in_head = true;
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match e.local_name().as_ref() {
                b"head" => {
                    if let Some(p) = pending.as_mut() {
                        if p.in_head {
                            p.in_head = false;
                            p.heads_seen += 1;
                        }
                    }
                }
                b"context" => in_context = false,
                b"lexelt" => lexelt = None,
                b"instance" => {
                    let Some(p) = pending.take() else { continue };
                    let Some(lx) = lexelt.clone() else {
                        return Err(xml_err(&reader, &format!("instance {} outside a lexelt", p.id)));
                    };
                    finish_instance(p, lx, config, policy, &mut out, &mut index);
                }
                _ => {}
            },
            Event::Text(ref t) if in_context => {
                let s = t.xml_content().map_err(|e| xml_err(&reader, &e))?;
                if let Some(p) = pending.as_mut() {
                    p.push_text(&s);
                }
            }
            Event::CData(ref t) if in_context => {
                let s = t.decode().map_err(|e| xml_err(&reader, &e))?;
                if let Some(p) = pending.as_mut() {
                    p.push_text(&s);
                }
            }
            Event::GeneralRef(ref r) if in_context => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => c.to_string(),
                    _ => {
                        let name = r.decode().map_err(|e| xml_err(&reader, &e))?;
                        quick_xml::escape::resolve_predefined_entity(&name)
                            .map(str::to_string)
                            // unknown entities separate words but add no text
                            .unwrap_or_else(|| " ".to_string())
                    }
                };
                if let Some(p) = pending.as_mut() {
                    p.push_text(&resolved);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(p) = pending {
        return Err(Error::Xml(format!("unterminated instance {}", p.id)));
    }
    for ds in &out.datasets {
        ds.validate()?;
    }
    Ok(out)
}

fn finish_instance(
    p: PendingInstance,
    lexelt: String,
    config: &TokenizerConfig,
    policy: SplitPolicy,
    out: &mut XmlImport,
    index: &mut BTreeMap<String, usize>,
) {
    let mut skip = |reason: &str| {
        log::warn!("skipping instance {}: {reason}", p.id);
        out.skipped.push((p.id.clone(), reason.to_string()));
    };
    if p.heads_seen == 0 {
        skip("no head element");
        return;
    }
    let before = tokenize(&p.before, config);
    let head = tokenize(&p.head, config);
    if head.is_empty() {
        skip("head element has no tokens");
        return;
    }
    let split = match policy {
        SplitPolicy::Train => Split::Train,
        SplitPolicy::Test => Split::Test,
        SplitPolicy::ByAnswers if p.answers.is_empty() => Split::Test,
        SplitPolicy::ByAnswers => Split::Train,
    };
    if split == Split::Train && p.answers.is_empty() {
        skip("training instance without answers");
        return;
    }
    let mut senses: Vec<String> = Vec::with_capacity(p.answers.len());
    for a in p.answers {
        if !senses.contains(&a) {
            senses.push(a);
        }
    }
    let target_index = before.len();
    let mut tokens = before;
    tokens.extend(head);
    tokens.extend(tokenize(&p.after, config));
    let inst = Instance {
        lexelt: lexelt.clone(),
        instance_id: p.id,
        gold_senses: senses,
        tokens,
        target_index,
    };
    let slot = *index.entry(lexelt.clone()).or_insert_with(|| {
        out.datasets.push(LexeltDataset::new(lexelt));
        out.datasets.len() - 1
    });
    match split {
        Split::Train => out.datasets[slot].train.push(inst),
        Split::Test => out.datasets[slot].test.push(inst),
    }
}
