//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gating criterion fails.
//!
//! The data-dependent check runs only when `LEXSAMPLE_EN_DATA` /
//! `LEXSAMPLE_EN_KEY` (and optionally `LEXSAMPLE_ES_DATA` /
//! `LEXSAMPLE_ES_KEY`) point at converted lexical-sample data and answer keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexsample::corpus::{write_canonical_all, LexeltDataset};
use lexsample::eval::{agreement, score, score_predictions, AgreementReport, KeySet, Predictions};
use lexsample::exec::Exec;
use lexsample::experiment::{load_datasets, run_experiment, Manifest};
use lexsample::featurize::{BitVector, FeatureVector};
use lexsample::learners::{Classifier, Learner, NaiveBayesModel, TrainingData};
use lexsample::ngram::{g_squared, ContingencyTable};
use lexsample::stoplist::{build_stoplist, StopList, DEFAULT_MIN_COUNT, DEFAULT_SAMPLE_SIZE};
use lexsample::synth::{null_signal, planted, SynthConfig, FUNCTION_WORDS};
use lexsample::systems::{build_system, run_system, Language, ENGLISH_SYSTEMS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// G² straight from its definition, sharing no code with the library.
fn naive_g2(cells: [u64; 4]) -> f64 {
    let o = cells.map(|c| c as f64);
    let n: f64 = o.iter().sum();
    let rows = [o[0] + o[1], o[2] + o[3]];
    let cols = [o[0] + o[2], o[1] + o[3]];
    let mut g = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let obs = o[2 * i + j];
            if obs > 0.0 {
                let expected = rows[i] * cols[j] / n;
                g += obs * (obs / expected).ln();
            }
        }
    }
    2.0 * g
}

fn g2_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut tables = 0;
    while tables < 1000 {
        let cells: [u64; 4] = std::array::from_fn(|_| rng.random_range(0..=10_000));
        if cells.iter().sum::<u64>() == 0 {
            continue;
        }
        let t = ContingencyTable::new(cells[0], cells[1], cells[2], cells[3]);
        let g = g_squared(&t).unwrap();
        let oracle = naive_g2(cells);
        worst_abs = worst_abs.max((g - oracle).abs());
        worst_rel = worst_rel.max((g - oracle).abs() / oracle.abs().max(1.0));
        tables += 1;
    }
    let perfect = g_squared(&ContingencyTable::new(10, 0, 0, 10)).unwrap();
    let perfect_err = (perfect - 40.0 * std::f64::consts::LN_2).abs();
    let mut independent_nonzero = 0;
    for _ in 0..1000 {
        let (a, b, c, d): (u64, u64, u64, u64) = (
            rng.random_range(1..100),
            rng.random_range(1..100),
            rng.random_range(1..100),
            rng.random_range(1..100),
        );
        if g_squared(&ContingencyTable::new(a * c, a * d, b * c, b * d)).unwrap() != 0.0 {
            independent_nonzero += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst_rel <= 1e-9 && perfect_err <= 1e-9 && independent_nonzero == 0 && elapsed < 1.0,
        format!(
            "1000 tables: max |diff| {worst_abs:.2e} (relative {worst_rel:.2e}); (10,0,0,10) off 40 ln 2 by {perfect_err:.1e}; \
             {independent_nonzero}/1000 independence tables nonzero; {elapsed:.3}s"
        ),
    )
}

fn vector(bits: &[bool], label: &str) -> FeatureVector {
    FeatureVector {
        instance_id: String::new(),
        bits: BitVector::from_bools(bits),
        label: Some(label.into()),
    }
}

fn naive_bayes_hand() -> Outcome {
    let data = TrainingData::from_vectors(&[
        vector(&[true], "A"),
        vector(&[true], "A"),
        vector(&[true], "A"),
        vector(&[false], "B"),
    ])
    .unwrap();
    let m = NaiveBayesModel::fit(&data);
    let a = m.senses.iter().position(|s| s == "A").unwrap();
    let b = 1 - a;
    let d = Learner::NaiveBayes
        .train(&data)
        .unwrap()
        .predict(&BitVector::from_bools(&[true]))
        .unwrap();
    let errs = [
        (m.priors[a] - 2.0 / 3.0).abs(),
        (m.p_present[a][0] - 4.0 / 5.0).abs(),
        (m.p_present[b][0] - 1.0 / 3.0).abs(),
        // (2/3 · 4/5) / (2/3 · 4/5 + 1/3 · 1/3) = 24/29
        (d.get("A") - 24.0 / 29.0).abs(),
        (d.get("B") - 5.0 / 29.0).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    check(
        worst <= 1e-12 && d.argmax() == "A",
        format!(
            "prior(A)=2/3, P(f1|A)=4/5, P(f1|B)=1/3, scores 24/29 vs 5/29, argmax {}; max error {worst:.1e}",
            d.argmax()
        ),
    )
}

fn stump_floor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let mut violations = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..80);
        let width = rng.random_range(1..12);
        let senses = rng.random_range(1..5);
        let density = rng.random_range(0.05..0.95);
        let vectors: Vec<FeatureVector> = (0..n)
            .map(|_| {
                let bits: Vec<bool> = (0..width).map(|_| rng.random_bool(density)).collect();
                vector(&bits, &format!("s{}", rng.random_range(0..senses)))
            })
            .collect();
        let data = TrainingData::from_vectors(&vectors).unwrap();
        let model = Learner::stump().train(&data).unwrap();
        let correct = vectors
            .iter()
            .filter(|v| model.predict(&v.bits).unwrap().argmax() == v.label.as_deref().unwrap())
            .count();
        let majority = *data.class_counts().iter().max().unwrap() as usize;
        if correct < majority {
            violations += 1;
        }
    }
    check(
        violations == 0,
        format!("200 fuzzed datasets, {violations} below the majority-class frequency"),
    )
}

fn pct(x: f64) -> f64 {
    (100.0 * x).round()
}

/// Builds answer sets whose per-instance correctness yields `counts`.
fn predictions_for(counts: &[u64]) -> (Vec<Predictions>, KeySet) {
    let systems = counts.len() - 1;
    let mut key = KeySet::new();
    let mut preds: Vec<Predictions> = (0..systems).map(|s| Predictions::new(format!("sys{s}"))).collect();
    let mut i = 0;
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let id = format!("{i:05}");
            key.insert("w", &id, ["right"]).unwrap();
            for (s, p) in preds.iter_mut().enumerate() {
                let sense = if s < k { "right" } else { "wrong" };
                p.senses.insert(("w".into(), id.clone()), sense.into());
            }
            i += 1;
        }
    }
    (preds, key)
}

fn agreement_arithmetic() -> Outcome {
    // two top systems: neither, exactly one, both
    let pair = [965, 1183, 2180];
    let (preds, key) = predictions_for(&pair);
    let r = agreement(&preds, &key).unwrap();
    let from_counts = AgreementReport::from_counts(r.systems.clone(), pair.to_vec()).unwrap();
    let shares = [pct(r.share(2)), pct(r.share(1)), pct(r.share(0))];
    // 1183/4328 is 27.3%; the 28% usually quoted is the remainder 100 - 50 - 22
    let one_as_remainder = 100.0 - shares[0] - shares[2];
    let pair_ok =
        r == AgreementReport {
            per_system: r.per_system.clone(),
            ..from_counts
        } && r.total == 4328
            && pct(r.optimal_accuracy) == 78.0
            && shares == [50.0, 27.0, 22.0]
            && one_as_remainder == 28.0;

    // three top systems: 1939 all correct, 816 none; middle buckets arbitrary
    let triple = [816, 800, 773, 1939];
    let (preds, key) = predictions_for(&triple);
    let t = agreement(&preds, &key).unwrap();
    let all3 = (1000.0 * t.share(3)).round() / 10.0;
    let none3 = pct(t.share(0));
    let triple_ok = t.total == 4328 && all3 == 44.8 && none3 == 19.0;

    // all eight systems: 1705 all correct, 1299 none, optimal 70%
    let mut eight = vec![0u64; 9];
    eight[8] = 1705;
    eight[0] = 1299;
    eight[4] = 4328 - 1705 - 1299;
    let e = AgreementReport::from_counts((0..8).map(|i| i.to_string()).collect(), eight).unwrap();
    let eight_ok = pct(e.share(8)) == 39.0 && pct(e.share(0)) == 30.0 && pct(e.optimal_accuracy) == 70.0;

    check(
        pair_ok && triple_ok && eight_ok,
        format!(
            "pair: optimal {:.3} ({}%), shares {}/{}/{} with the one-correct share {:.1}% (28% as 100-50-22); \
             triple: all {all3}% none {none3}%; eight: all {}% none {}% optimal {}%",
            r.optimal_accuracy,
            pct(r.optimal_accuracy),
            shares[0],
            shares[1],
            shares[2],
            100.0 * r.share(1),
            pct(e.share(8)),
            pct(e.share(0)),
            pct(e.optimal_accuracy)
        ),
    )
}

fn function_words() -> StopList {
    StopList::from_words(FUNCTION_WORDS.iter().copied())
}

fn accuracy_of(system: &str, ds: &LexeltDataset, stop: &StopList) -> f64 {
    let cfg = build_system(system, Language::En).unwrap();
    let answers = run_system(&cfg, ds, stop, 42).unwrap();
    score(&[answers], &KeySet::from_datasets(std::slice::from_ref(ds)))
        .unwrap()
        .accuracy
}

fn planted_signal() -> Outcome {
    let start = Instant::now();
    let ds = planted(&SynthConfig::default()).unwrap();
    let stop = function_words();
    let accs: Vec<(&str, f64)> = ENGLISH_SYSTEMS
        .iter()
        .map(|s| (*s, accuracy_of(s, &ds, &stop)))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = accs.iter().map(|a| a.1).fold(1.0, f64::min);
    let list: Vec<String> = accs.iter().map(|(s, a)| format!("{s} {a:.3}")).collect();
    check(
        worst >= 0.95 && elapsed < 60.0,
        format!("500 train / 200 test: {}; {elapsed:.1}s", list.join(", ")),
    )
}

fn majority_baseline(ds: &LexeltDataset) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for i in &ds.train {
        *counts.entry(i.gold_senses[0].as_str()).or_default() += 1;
    }
    // ties resolved lexicographically, as the learners do
    let best = counts.iter().rev().max_by_key(|(_, &c)| c).map(|(s, _)| *s).unwrap();
    ds.test
        .iter()
        .filter(|i| i.gold_senses.iter().any(|g| g == best))
        .count() as f64
        / ds.test.len() as f64
}

fn null_gaps(cfg: &SynthConfig) -> (f64, Vec<(&'static str, f64)>, f64) {
    let ds = null_signal(cfg).unwrap();
    let stop = function_words();
    let base = majority_baseline(&ds);
    let accs: Vec<(&str, f64)> = ENGLISH_SYSTEMS
        .iter()
        .map(|s| (*s, accuracy_of(s, &ds, &stop)))
        .collect();
    let worst = accs.iter().map(|a| (a.1 - base).abs()).fold(0.0, f64::max);
    (base, accs, worst)
}

/// Balanced senses, so a prediction that ignores the text scores the
/// baseline in expectation whatever the learner, and a test split large
/// enough that sampling noise stays well under the tolerance.
fn null_signal_sanity() -> Outcome {
    let cfg = SynthConfig {
        sense_weights: vec![0.5, 0.5],
        n_test: 2000,
        ..Default::default()
    };
    let (base, accs, worst) = null_gaps(&cfg);
    let list: Vec<String> = accs.iter().map(|(s, a)| format!("{s} {a:.3}")).collect();
    check(
        worst <= 0.05,
        format!(
            "500 train / 2000 test, balanced: majority baseline {base:.3}; {}; largest gap {:.1} points",
            list.join(", "),
            100.0 * worst
        ),
    )
}

/// The same check on the planted corpus shape with skewed senses; high
/// variance learners drift from the baseline there without any leakage.
fn null_signal_small_skewed() -> String {
    let (base, accs, worst) = null_gaps(&SynthConfig::default());
    let (who, _) = accs
        .iter()
        .max_by(|a, b| (a.1 - base).abs().total_cmp(&(b.1 - base).abs()))
        .unwrap();
    format!(
        "null signal on 500 train / 200 test at 60/40: baseline {base:.3}, largest gap {:.1} points ({who})",
        100.0 * worst
    )
}

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpora: Vec<LexeltDataset> = [("bank.n", "bank", 11), ("line.n", "line", 12), ("serve.v", "serve", 13)]
        .into_iter()
        .map(|(lexelt, target, seed)| {
            planted(&SynthConfig {
                lexelt: lexelt.into(),
                target: target.into(),
                n_train: 150,
                n_test: 50,
                seed,
                ..Default::default()
            })
            .unwrap()
        })
        .collect();
    write_canonical_all(&corpora, dir.path().join("data.jsonl")).unwrap();
    let manifest = dir.path().join("run.toml");
    fs::write(&manifest, "language = \"en\"\ndata = [\"data.jsonl\"]\nout = \"out\"\n").unwrap();

    let m = Manifest::read(&manifest).unwrap();
    run_experiment(&m, Exec::default()).unwrap();
    let first = tree_bytes(&m.out);
    fs::remove_dir_all(&m.out).unwrap();
    run_experiment(&Manifest::read(&manifest).unwrap(), Exec::default()).unwrap();
    let second = tree_bytes(&m.out);
    fs::remove_dir_all(&m.out).unwrap();
    let seq = Manifest {
        jobs: 1,
        ..Manifest::read(&manifest).unwrap()
    };
    run_experiment(&seq, Exec::Sequential).unwrap();
    let sequential = tree_bytes(&m.out);
    check(
        first == second && first == sequential && first.len() == 8 * 3 + 2,
        format!(
            "{} files; rerun identical: {}; sequential run identical: {}",
            first.len(),
            first == second,
            first == sequential
        ),
    )
}

/// Returns None when the data is not configured.
fn reference_accuracies() -> Option<Outcome> {
    let en_data = std::env::var_os("LEXSAMPLE_EN_DATA")?;
    let en_key = std::env::var_os("LEXSAMPLE_EN_KEY")?;
    let run = |data: &std::ffi::OsStr, key: &std::ffi::OsStr, systems: &[&str], lang: Language| -> Vec<f64> {
        let datasets = load_datasets(&[PathBuf::from(data)]).unwrap();
        let key = KeySet::read(key).unwrap();
        let stop = build_stoplist(&datasets, 42, DEFAULT_SAMPLE_SIZE, DEFAULT_MIN_COUNT).unwrap();
        systems
            .iter()
            .map(|s| {
                let cfg = build_system(s, lang).unwrap();
                let sets: Vec<_> = datasets
                    .iter()
                    .map(|d| run_system(&cfg, d, &stop, 42).unwrap())
                    .collect();
                score_predictions(&Predictions::from_answer_sets(*s, &sets), &key)
                    .unwrap()
                    .accuracy
            })
            .collect()
    };
    let en = run(&en_data, &en_key, &["duluth3", "duluthB"], Language::En);
    let mut pass = (en[0] - 0.57).abs() <= 0.03 && en[1] >= 0.48;
    let mut detail = format!("duluth3 {:.3} (57% ± 3), duluthB {:.3} (≥ 48%)", en[0], en[1]);
    if let (Some(d), Some(k)) = (
        std::env::var_os("LEXSAMPLE_ES_DATA"),
        std::env::var_os("LEXSAMPLE_ES_KEY"),
    ) {
        let es = run(&d, &k, &["duluth8"], Language::Es);
        pass &= (es[0] - 0.61).abs() <= 0.03;
        detail.push_str(&format!(", duluth8 {:.3} (61% ± 3)", es[0]));
    }
    Some(check(pass, detail))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("G2 oracle equivalence", g2_oracle),
        ("Naive Bayes hand oracle", naive_bayes_hand),
        ("stump floor", stump_floor),
        ("agreement arithmetic", agreement_arithmetic),
        ("planted-signal end-to-end", planted_signal),
        ("null-signal sanity", null_signal_sanity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("INFO {}", null_signal_small_skewed());
    match reference_accuracies() {
        Some(o) => println!(
            "{} reference accuracies (non-gating): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        ),
        None => println!("SKIP reference accuracies (non-gating): set LEXSAMPLE_EN_DATA and LEXSAMPLE_EN_KEY"),
    }
    println!("{} of 7 gating criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
