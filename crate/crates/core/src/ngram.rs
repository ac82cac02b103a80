//! N-gram counting, log-likelihood ratio scoring and feature selection.
//!
//! Counts are always taken over one lexelt's training instances. Pairs never
//! cross an instance boundary.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::stoplist::StopList;

/// G² critical values for one degree of freedom.
pub const G2_P10: f64 = 2.706;
pub const G2_P01: f64 = 6.635;
pub const G2_P001: f64 = 10.827;

pub const MAX_GAP: u8 = 2;

/// Observed 2×2 counts for a word pair `(w1, w2)`: `n11` windows with both,
/// `n12` with `w1` first but not `w2` second, `n21` the reverse, `n22` neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub n11: u64,
    pub n12: u64,
    pub n21: u64,
    pub n22: u64,
}

impl ContingencyTable {
    pub fn new(n11: u64, n12: u64, n21: u64, n22: u64) -> Self {
        ContingencyTable { n11, n12, n21, n22 }
    }

    /// Builds the table from the joint count and the marginals.
    pub fn from_margins(n11: u64, n1p: u64, np1: u64, npp: u64) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("inconsistent margins n11={n11} n1p={n1p} np1={np1} npp={npp}"));
        let n12 = n1p.checked_sub(n11).ok_or_else(bad)?;
        let n21 = np1.checked_sub(n11).ok_or_else(bad)?;
        let n22 = npp.checked_sub(n11 + n12 + n21).ok_or_else(bad)?;
        Ok(ContingencyTable { n11, n12, n21, n22 })
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n12 + self.n21 + self.n22
    }

    /// Log-likelihood ratio `2 Σ n_ij ln(n_ij / m_ij)` with expected counts
    /// `m_ij = row_i · col_j / n`. Empty cells contribute zero.
    pub fn g_squared(&self) -> Result<f64> {
        let npp = self.total();
        if npp == 0 {
            return Err(Error::EmptyTable);
        }
        let rows = [self.n11 + self.n12, self.n21 + self.n22];
        let cols = [self.n11 + self.n21, self.n12 + self.n22];
        let cells = [[self.n11, self.n12], [self.n21, self.n22]];
        let n = npp as f64;
        let mut sum = 0.0;
        for (i, row) in cells.iter().enumerate() {
            for (j, &obs) in row.iter().enumerate() {
                if obs == 0 {
                    continue;
                }
                let obs = obs as f64;
                // obs·n and row·col are exact integers in f64 for any table that
                // fits in memory, so independent tables give ln(1) = 0 exactly.
                let ratio = (obs * n) / (rows[i] as f64 * cols[j] as f64);
                sum += obs * ratio.ln();
            }
        }
        Ok((2.0 * sum).max(0.0))
    }
}

pub fn g_squared(t: &ContingencyTable) -> Result<f64> {
    t.g_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Unigram,
    Bigram,
    Cooccurrence,
    GappedBigram,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Unigram => "unigram",
            FeatureKind::Bigram => "bigram",
            FeatureKind::Cooccurrence => "cooccurrence",
            FeatureKind::GappedBigram => "gapped_bigram",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "unigram" => FeatureKind::Unigram,
            "bigram" => FeatureKind::Bigram,
            "cooccurrence" => FeatureKind::Cooccurrence,
            "gapped_bigram" => FeatureKind::GappedBigram,
            _ => return Err(Error::InvalidParameter(format!("unknown feature kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// A binary lexical feature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    Unigram {
        word: String,
    },
    Bigram {
        first: String,
        second: String,
    },
    /// `word` immediately to the given side of the target.
    Cooccurrence {
        word: String,
        side: Side,
    },
    /// `first` followed by `second` with at most `max_gap` tokens between.
    GappedBigram {
        first: String,
        second: String,
        max_gap: u8,
    },
}

impl Feature {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Feature::Unigram { .. } => FeatureKind::Unigram,
            Feature::Bigram { .. } => FeatureKind::Bigram,
            Feature::Cooccurrence { .. } => FeatureKind::Cooccurrence,
            Feature::GappedBigram { .. } => FeatureKind::GappedBigram,
        }
    }

    pub fn unigram(w: &str) -> Self {
        Feature::Unigram { word: w.into() }
    }

    pub fn bigram(a: &str, b: &str) -> Self {
        Feature::Bigram {
            first: a.into(),
            second: b.into(),
        }
    }

    pub fn cooccurrence(w: &str, side: Side) -> Self {
        Feature::Cooccurrence { word: w.into(), side }
    }

    pub fn gapped(a: &str, b: &str, max_gap: u8) -> Self {
        Feature::GappedBigram {
            first: a.into(),
            second: b.into(),
            max_gap,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Unigram { word } => write!(f, "{word}"),
            Feature::Bigram { first, second } => write!(f, "{first} {second}"),
            Feature::Cooccurrence { word, side } => write!(f, "{word} ({side})"),
            Feature::GappedBigram { first, second, max_gap } => write!(f, "{first} ~{max_gap} {second}"),
        }
    }
}

/// Which candidates of one kind to keep. `g2_min` is `None` for kinds without
/// a significance test (unigrams).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub min_freq: u64,
    #[serde(default)]
    pub g2_min: Option<f64>,
    #[serde(default)]
    pub max_gap: u8,
    /// Also drop co-occurrence candidates whose word is stop-listed.
    #[serde(default)]
    pub stop_neighbors: bool,
}

impl FeatureSpec {
    pub fn unigrams(min_freq: u64) -> Self {
        FeatureSpec {
            kind: FeatureKind::Unigram,
            min_freq,
            g2_min: None,
            max_gap: 0,
            stop_neighbors: false,
        }
    }

    pub fn bigrams(min_freq: u64, g2_min: f64) -> Self {
        FeatureSpec {
            kind: FeatureKind::Bigram,
            min_freq,
            g2_min: Some(g2_min),
            max_gap: 0,
            stop_neighbors: false,
        }
    }

    pub fn cooccurrences(min_freq: u64, g2_min: f64) -> Self {
        FeatureSpec {
            kind: FeatureKind::Cooccurrence,
            min_freq,
            g2_min: Some(g2_min),
            max_gap: 0,
            stop_neighbors: false,
        }
    }

    pub fn gapped_bigrams(max_gap: u8, min_freq: u64, g2_min: f64) -> Self {
        FeatureSpec {
            kind: FeatureKind::GappedBigram,
            min_freq,
            g2_min: Some(g2_min),
            max_gap,
            stop_neighbors: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.g2_min {
            if g.is_nan() || g < 0.0 {
                return Err(Error::InvalidParameter(format!("g2_min must be >= 0, got {g}")));
            }
        }
        if self.max_gap > MAX_GAP {
            return Err(Error::InvalidParameter(format!(
                "max_gap must be at most {MAX_GAP}, got {}",
                self.max_gap
            )));
        }
        Ok(())
    }
}

/// A feature with the statistics it was selected on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFeature {
    pub feature: Feature,
    pub freq: u64,
    pub g2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub spec: FeatureSpec,
    pub stoplist_id: String,
}

/// Ordered, duplicate-free features. Position `i` is bit `i` of every
/// feature vector built over the set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub entries: Vec<ScoredFeature>,
    pub selections: Vec<Selection>,
}

impl FeatureSet {
    pub fn from_features(features: impl IntoIterator<Item = Feature>) -> Self {
        let mut fs = FeatureSet::default();
        for f in features {
            fs.push(ScoredFeature {
                feature: f,
                freq: 0,
                g2: None,
            });
        }
        fs
    }

    /// Appends unless the feature is already present.
    pub fn push(&mut self, entry: ScoredFeature) -> bool {
        if self.entries.iter().any(|e| e.feature == entry.feature) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.entries.iter().map(|e| &e.feature)
    }

    /// `self` followed by the features of `other` not already present.
    pub fn union(&self, other: &FeatureSet) -> FeatureSet {
        let mut out = self.clone();
        for e in &other.entries {
            out.push(e.clone());
        }
        out.selections.extend(other.selections.iter().cloned());
        out
    }

    /// Tab-separated listing: `kind words side/gap freq g2`, preceded by one
    /// `#` comment line per selection record.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for sel in &self.selections {
            let g2 = sel.spec.g2_min.map_or("-".to_string(), |g| g.to_string());
            s.push_str(&format!(
                "# selection kind={} min_freq={} g2_min={} max_gap={} stoplist={}\n",
                sel.spec.kind, sel.spec.min_freq, g2, sel.spec.max_gap, sel.stoplist_id
            ));
        }
        for e in &self.entries {
            let (words, extra) = match &e.feature {
                Feature::Unigram { word } => (word.clone(), "-".to_string()),
                Feature::Bigram { first, second } => (format!("{first} {second}"), "-".to_string()),
                Feature::Cooccurrence { word, side } => (word.clone(), side.to_string()),
                Feature::GappedBigram { first, second, max_gap } => (format!("{first} {second}"), max_gap.to_string()),
            };
            let g2 = e.g2.map_or("-".to_string(), |g| g.to_string());
            s.push_str(&format!("{}\t{words}\t{extra}\t{}\t{g2}\n", e.feature.kind(), e.freq));
        }
        s
    }

    /// Parses the listing written by [`FeatureSet::to_text`]. Selection
    /// comments are not restored.
    pub fn from_text(text: &str) -> Result<FeatureSet> {
        let mut fs = FeatureSet::default();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| Error::parse("<feature set>", n + 1, m);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(err("expected 5 tab-separated columns"));
            }
            let kind: FeatureKind = cols[0].parse()?;
            let words: Vec<&str> = cols[1].split(' ').collect();
            let two = |words: &[&str]| -> Result<(String, String)> {
                match words {
                    [a, b] => Ok((a.to_string(), b.to_string())),
                    _ => Err(err("expected two words")),
                }
            };
            let feature = match kind {
                FeatureKind::Unigram => Feature::unigram(cols[1]),
                FeatureKind::Bigram => {
                    let (first, second) = two(&words)?;
                    Feature::Bigram { first, second }
                }
                FeatureKind::Cooccurrence => Feature::Cooccurrence {
                    word: cols[1].to_string(),
                    side: match cols[2] {
                        "left" => Side::Left,
                        "right" => Side::Right,
                        _ => return Err(err("side must be left or right")),
                    },
                },
                FeatureKind::GappedBigram => {
                    let (first, second) = two(&words)?;
                    let max_gap = cols[2].parse().map_err(|_| err("bad gap"))?;
                    Feature::GappedBigram { first, second, max_gap }
                }
            };
            let freq = cols[3].parse().map_err(|_| err("bad frequency"))?;
            let g2 = match cols[4] {
                "-" => None,
                g => Some(g.parse().map_err(|_| err("bad g2"))?),
            };
            fs.push(ScoredFeature { feature, freq, g2 });
        }
        Ok(fs)
    }

    /// Digest of the ordered feature list.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for f in self.features() {
            h.update(serde_json::to_vec(f).expect("features serialize"));
            h.update(b"\n");
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Occurrences of every non-stopped token.
pub fn count_unigrams<'a>(instances: &'a [Instance], stoplist: &StopList) -> HashMap<&'a str, u64> {
    let mut counts = HashMap::new();
    for inst in instances {
        for t in &inst.tokens {
            if !stoplist.contains(t) {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Ordered pair counts within a gap limit, with the marginals needed for
/// contingency tables. Margins and the window total cover every window;
/// pairs whose two words are both stop-listed are left out of `pairs`.
#[derive(Debug, Clone, Default)]
pub struct PairCounts<'a> {
    pub max_gap: u8,
    pub pairs: HashMap<(&'a str, &'a str), u64>,
    pub first: HashMap<&'a str, u64>,
    pub second: HashMap<&'a str, u64>,
    pub windows: u64,
}

impl<'a> PairCounts<'a> {
    pub fn count(&self, a: &str, b: &str) -> u64 {
        self.pairs.get(&(a, b)).copied().unwrap_or(0)
    }

    pub fn table(&self, a: &str, b: &str) -> ContingencyTable {
        let n11 = self.count(a, b);
        let n1p = self.first.get(a).copied().unwrap_or(0);
        let np1 = self.second.get(b).copied().unwrap_or(0);
        ContingencyTable::from_margins(n11, n1p, np1, self.windows).expect("margins are consistent by construction")
    }

    pub fn candidates(&self, kind: FeatureKind) -> Vec<Candidate> {
        self.pairs
            .iter()
            .map(|(&(a, b), &n)| Candidate {
                feature: match kind {
                    FeatureKind::GappedBigram => Feature::gapped(a, b, self.max_gap),
                    _ => Feature::bigram(a, b),
                },
                freq: n,
                table: Some(self.table(a, b)),
            })
            .collect()
    }
}

pub fn count_bigrams<'a>(instances: &'a [Instance], stoplist: &StopList, max_gap: u8) -> Result<PairCounts<'a>> {
    if max_gap > MAX_GAP {
        return Err(Error::InvalidParameter(format!("max_gap must be at most {MAX_GAP}")));
    }
    let mut pc = PairCounts {
        max_gap,
        ..Default::default()
    };
    for inst in instances {
        let toks = &inst.tokens;
        let stopped: Vec<bool> = toks.iter().map(|t| stoplist.contains(t)).collect();
        for i in 0..toks.len() {
            for j in (i + 1)..toks.len().min(i + 2 + max_gap as usize) {
                let (a, b) = (toks[i].as_str(), toks[j].as_str());
                pc.windows += 1;
                *pc.first.entry(a).or_insert(0) += 1;
                *pc.second.entry(b).or_insert(0) += 1;
                if !(stopped[i] && stopped[j]) {
                    *pc.pairs.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(pc)
}

/// Words immediately left and right of the target, scored as bigrams in
/// which the target position is one fixed element.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceCounts<'a> {
    pub pairs: HashMap<(&'a str, Side), u64>,
    pub first: HashMap<&'a str, u64>,
    pub second: HashMap<&'a str, u64>,
    /// Adjacent windows whose first / second element is the target.
    pub target_first: u64,
    pub target_second: u64,
    pub windows: u64,
}

impl<'a> CooccurrenceCounts<'a> {
    pub fn count(&self, word: &str, side: Side) -> u64 {
        self.pairs.get(&(word, side)).copied().unwrap_or(0)
    }

    pub fn table(&self, word: &str, side: Side) -> ContingencyTable {
        let n11 = self.count(word, side);
        let (n1p, np1) = match side {
            Side::Left => (self.first.get(word).copied().unwrap_or(0), self.target_second),
            Side::Right => (self.target_first, self.second.get(word).copied().unwrap_or(0)),
        };
        ContingencyTable::from_margins(n11, n1p, np1, self.windows).expect("margins are consistent by construction")
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.pairs
            .iter()
            .map(|(&(w, side), &n)| Candidate {
                feature: Feature::cooccurrence(w, side),
                freq: n,
                table: Some(self.table(w, side)),
            })
            .collect()
    }
}

pub fn extract_cooccurrences(instances: &[Instance]) -> CooccurrenceCounts<'_> {
    let mut cc = CooccurrenceCounts::default();
    for inst in instances {
        let toks = &inst.tokens;
        let t = inst.target_index;
        for i in 0..toks.len().saturating_sub(1) {
            cc.windows += 1;
            if i == t {
                cc.target_first += 1;
            } else {
                *cc.first.entry(toks[i].as_str()).or_insert(0) += 1;
            }
            if i + 1 == t {
                cc.target_second += 1;
            } else {
                *cc.second.entry(toks[i + 1].as_str()).or_insert(0) += 1;
            }
        }
        if t > 0 {
            *cc.pairs.entry((toks[t - 1].as_str(), Side::Left)).or_insert(0) += 1;
        }
        if t + 1 < toks.len() {
            *cc.pairs.entry((toks[t + 1].as_str(), Side::Right)).or_insert(0) += 1;
        }
    }
    cc
}

/// A counted feature with its contingency table, if it has a significance test.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub feature: Feature,
    pub freq: u64,
    pub table: Option<ContingencyTable>,
}

/// Keeps candidates with `freq >= min_freq` and, when a threshold is given,
/// `G² >= g2_min`. Output is ordered by descending G², then descending
/// frequency, then feature.
pub fn select_candidates(candidates: Vec<Candidate>, min_freq: u64, g2_min: Option<f64>) -> Result<Vec<ScoredFeature>> {
    let mut kept = Vec::new();
    for c in candidates {
        if c.freq < min_freq {
            continue;
        }
        let g2 = match (g2_min, c.table) {
            (Some(_), Some(t)) => Some(t.g_squared()?),
            _ => None,
        };
        if let (Some(min), Some(g)) = (g2_min, g2) {
            if g < min {
                continue;
            }
        }
        kept.push(ScoredFeature {
            feature: c.feature,
            freq: c.freq,
            g2,
        });
    }
    kept.sort_by(|a, b| {
        let g = match (a.g2, b.g2) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            _ => Ordering::Equal,
        };
        g.then(b.freq.cmp(&a.freq)).then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(kept)
}

/// Counts candidates of `spec.kind` over `instances` and selects them.
pub fn select_features(instances: &[Instance], spec: &FeatureSpec, stoplist: &StopList) -> Result<FeatureSet> {
    spec.validate()?;
    let candidates = match spec.kind {
        FeatureKind::Unigram => count_unigrams(instances, stoplist)
            .into_iter()
            .map(|(w, n)| Candidate {
                feature: Feature::unigram(w),
                freq: n,
                table: None,
            })
            .collect(),
        FeatureKind::Bigram => count_bigrams(instances, stoplist, 0)?.candidates(FeatureKind::Bigram),
        FeatureKind::GappedBigram => {
            count_bigrams(instances, stoplist, spec.max_gap)?.candidates(FeatureKind::GappedBigram)
        }
        FeatureKind::Cooccurrence => {
            let mut c = extract_cooccurrences(instances).candidates();
            if spec.stop_neighbors {
                c.retain(|c| match &c.feature {
                    Feature::Cooccurrence { word, .. } => !stoplist.contains(word),
                    _ => true,
                });
            }
            c
        }
    };
    let g2_min = match spec.kind {
        FeatureKind::Unigram => None,
        _ => Some(spec.g2_min.unwrap_or(0.0)),
    };
    Ok(FeatureSet {
        entries: select_candidates(candidates, spec.min_freq, g2_min)?,
        selections: vec![Selection {
            spec: spec.clone(),
            stoplist_id: stoplist.id(),
        }],
    })
}
