use lexsample::corpus::{
    parse_senseval_xml, read_canonical_all, write_canonical_all, LexeltDataset, SplitPolicy, Token, TokenizerConfig,
};
use lexsample::eval::{score, KeySet};
use lexsample::exec::Exec;
use lexsample::stoplist::StopList;
use lexsample::synth::{planted, SynthConfig, FUNCTION_WORDS};
use lexsample::systems::{
    build_system, run_system, run_system_with, train_system, Language, ENGLISH_SYSTEMS, SPANISH_SYSTEMS,
};

fn stop() -> StopList {
    StopList::from_words(FUNCTION_WORDS.iter().copied())
}

fn small() -> LexeltDataset {
    planted(&SynthConfig {
        n_train: 120,
        n_test: 40,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn same_seed_gives_byte_identical_answers() {
    let ds = small();
    for name in ENGLISH_SYSTEMS {
        let cfg = build_system(name, Language::En).unwrap();
        let a = run_system_with(&cfg, &ds, &stop(), 42, Exec::Parallel).unwrap();
        let b = run_system_with(&cfg, &ds, &stop(), 42, Exec::Sequential).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn bagged_systems_depend_on_the_seed() {
    let ds = small();
    let cfg = build_system("duluth2", Language::En).unwrap();
    let a = train_system(&cfg, &ds, &stop(), 1, Exec::default()).unwrap();
    let b = train_system(&cfg, &ds, &stop(), 2, Exec::default()).unwrap();
    assert_ne!(a.pipeline, b.pipeline);
}

/// Scrambling the test split, labels included, must not change anything
/// that was trained.
#[test]
fn test_split_never_reaches_training() {
    let ds = small();
    let mut poisoned = ds.clone();
    for inst in &mut poisoned.test {
        inst.gold_senses = vec!["poison".into()];
        for t in inst.tokens.iter_mut() {
            *t = Token::new(format!("leak{}", t.as_str())).unwrap();
        }
    }
    for name in ENGLISH_SYSTEMS {
        let cfg = build_system(name, Language::En).unwrap();
        let clean = train_system(&cfg, &ds, &stop(), 42, Exec::default()).unwrap();
        let dirty = train_system(&cfg, &poisoned, &stop(), 42, Exec::default()).unwrap();
        assert_eq!(clean, dirty, "{name}");
    }
}

#[test]
fn spanish_systems_run_end_to_end() {
    let ds = small();
    let key = KeySet::from_datasets(std::slice::from_ref(&ds));
    for name in SPANISH_SYSTEMS {
        let cfg = build_system(name, Language::Es).unwrap();
        let a = run_system(&cfg, &ds, &stop(), 42).unwrap();
        assert!(score(&[a], &key).unwrap().accuracy >= 0.9, "{name}");
    }
}

#[test]
fn xml_to_canonical_to_answers() {
    let mut doc = String::from("<corpus lang=\"english\"><lexelt item=\"bank.n\">\n");
    for i in 0..40 {
        let (cue, sense) = if i % 3 == 0 {
            ("river", "shore")
        } else {
            ("savings", "money")
        };
        let answer = if i < 30 {
            format!("<answer instance=\"b{i}\" senseid=\"{sense}\"/>")
        } else {
            String::new()
        };
        doc.push_str(&format!(
            "<instance id=\"b{i}\">{answer}<context>We walked to the {cue} <head>bank</head>, item {i}.</context></instance>\n"
        ));
    }
    doc.push_str("</lexelt></corpus>");
    let import = parse_senseval_xml(&doc, &TokenizerConfig::default(), SplitPolicy::ByAnswers).unwrap();
    assert!(import.skipped.is_empty());
    let ds = &import.datasets[0];
    assert_eq!((ds.train.len(), ds.test.len()), (30, 10));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.jsonl");
    write_canonical_all(&import.datasets, &path).unwrap();
    let back = read_canonical_all(&path).unwrap();
    assert_eq!(back, import.datasets);

    let cfg = build_system("duluthB", Language::En).unwrap();
    let answers = run_system(&cfg, &back[0], &stop(), 42).unwrap();
    for (id, d) in &answers.entries {
        let n: usize = id[1..].parse().unwrap();
        assert_eq!(d.sense, if n.is_multiple_of(3) { "shore" } else { "money" }, "{id}");
    }
}
