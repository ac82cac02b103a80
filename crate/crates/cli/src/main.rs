use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lexsample::corpus::{
    read_canonical_all, read_senseval_xml, write_canonical_all, LexeltDataset, SplitPolicy, TokenizerConfig,
};
use lexsample::eval::{agreement, score_predictions, write_answers, KeySet, Predictions};
use lexsample::exec::Exec;
use lexsample::experiment::{load_answer_tree, load_datasets, run_experiment, Manifest, DEFAULT_SEED};
use lexsample::stoplist::{build_stoplist, StopList, DEFAULT_MIN_COUNT, DEFAULT_SAMPLE_SIZE};
use lexsample::systems::{apply_system, build_system, train_system, Language, TrainedSystem};

#[derive(Parser)]
#[command(name = "wsd", version, about = "Supervised lexical-sample word sense disambiguation")]
struct Cli {
    /// More logging (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    /// Instances with answers are training data, the rest test data
    Auto,
}

#[derive(Subcommand)]
enum Command {
    /// Convert lexical-sample XML to canonical JSON lines
    Convert {
        /// XML files followed by the output file; lexelts found in several
        /// inputs are merged
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        split: SplitArg,
        #[arg(long, default_value = "en")]
        lang: Language,
    },
    /// Run the experiment described by a manifest
    Run {
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        stoplist: Option<PathBuf>,
        /// key=value, may be repeated
        #[arg(long = "config-override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score answer files against a key
    Score {
        /// A system's answer directory, or a directory of them
        answers: PathBuf,
        key: PathBuf,
    },
    /// Agreement between systems: how many got each instance right
    Agree {
        /// Answer directories followed by the key file
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,
        /// Print the machine-readable summary instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Induce a stop-list from training data
    Stoplist {
        #[arg(required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
        sample_size: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: u64,
    },
    /// Train one system on every lexelt of a data file and save the models
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "en")]
        lang: Language,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        stoplist: Option<PathBuf>,
        #[arg(long = "config-override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory for <lexelt>.json model files
        #[arg(long)]
        out: PathBuf,
    },
    /// Tag the test instances of a data file with saved models
    Apply {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for <lexelt>.ans answer files
        #[arg(long)]
        out: PathBuf,
    },
    /// List the registered systems, or print one system's configuration
    Systems {
        name: Option<String>,
        #[arg(long, default_value = "en")]
        lang: Language,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match dispatch(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, exec: Exec) -> Result<()> {
    match command {
        Command::Convert { paths, split, lang } => convert(&paths, split, lang),
        Command::Run {
            manifest,
            seed,
            jobs,
            stoplist,
            overrides,
            out,
        } => {
            let mut m = Manifest::read(&manifest)?;
            m.seed = seed.unwrap_or(m.seed);
            m.jobs = jobs.unwrap_or(m.jobs);
            m.stoplist = stoplist.or(m.stoplist);
            m.out = out.unwrap_or(m.out);
            for o in &overrides {
                m.add_override(o)?;
            }
            let summary = run_experiment(&m, exec).with_context(|| format!("running {}", manifest.display()))?;
            print!("{}", summary.to_text());
            Ok(())
        }
        Command::Score { answers, key } => score(&answers, &key),
        Command::Agree { paths, json } => agree(&paths, json),
        Command::Stoplist {
            data,
            out,
            seed,
            sample_size,
            min_count,
        } => {
            let datasets = load_datasets(&data)?;
            let list = build_stoplist(&datasets, seed, sample_size, min_count)?;
            list.write(&out)?;
            println!("{} words ({})", list.len(), list.id());
            Ok(())
        }
        Command::Train {
            data,
            system,
            lang,
            seed,
            stoplist,
            overrides,
            out,
        } => train(&data, &system, lang, seed, stoplist.as_deref(), &overrides, &out, exec),
        Command::Apply { models, data, out } => apply(&models, &data, &out, exec),
        Command::Systems { name, lang } => {
            match name {
                Some(n) => println!("{}", build_system(&n, lang)?.to_json()),
                None => {
                    for n in lang.system_names() {
                        let cfg = build_system(n, lang)?;
                        println!(
                            "{n:<10} {} component(s), digest {}",
                            cfg.pipeline.components().len(),
                            cfg.digest()
                        );
                    }
                }
            }
            Ok(())
        }
    }
}

fn convert(paths: &[PathBuf], split: SplitArg, lang: Language) -> Result<()> {
    let (output, inputs) = paths.split_last().expect("clap enforces two paths");
    let policy = match split {
        SplitArg::Train => SplitPolicy::Train,
        SplitArg::Test => SplitPolicy::Test,
        SplitArg::Auto => SplitPolicy::ByAnswers,
    };
    let config = TokenizerConfig::for_language(lang.code());
    let mut merged: Vec<LexeltDataset> = Vec::new();
    for input in inputs {
        let import =
            read_senseval_xml(input, &config, policy).with_context(|| format!("converting {}", input.display()))?;
        for (id, reason) in &import.skipped {
            log::warn!("{}: skipped {id}: {reason}", input.display());
        }
        for ds in import.datasets {
            match merged.iter_mut().find(|d| d.lexelt == ds.lexelt) {
                Some(d) => {
                    d.train.extend(ds.train);
                    d.test.extend(ds.test);
                }
                None => merged.push(ds),
            }
        }
    }
    for ds in &merged {
        ds.validate()?;
    }
    write_canonical_all(&merged, output)?;
    let count: usize = merged.iter().map(|d| d.train.len() + d.test.len()).sum();
    eprintln!("{count} instances in {} lexelts -> {}", merged.len(), output.display());
    Ok(())
}

fn score(answers: &Path, key: &Path) -> Result<()> {
    let key = KeySet::read(key)?;
    let systems = load_answer_tree(answers)?;
    for p in &systems {
        let s = score_predictions(p, &key).with_context(|| format!("scoring {}", p.system))?;
        println!("{:<12} {:.3} ({}/{})", p.system, s.accuracy, s.correct, s.total);
    }
    if systems.len() >= 2 {
        let r = agreement(&systems, &key)?;
        println!(
            "optimal combination: {:.3} ({:.0}%)",
            r.optimal_accuracy,
            100.0 * r.optimal_accuracy
        );
    }
    Ok(())
}

fn agree(paths: &[PathBuf], json: bool) -> Result<()> {
    let (key, dirs) = paths.split_last().expect("clap enforces two paths");
    let key = KeySet::read(key)?;
    let mut systems: Vec<Predictions> = Vec::new();
    for d in dirs {
        systems.extend(load_answer_tree(d)?);
    }
    let r = agreement(&systems, &key)?;
    if json {
        println!("{}", r.to_json());
    } else {
        print!("{}", r.to_text());
    }
    Ok(())
}

fn stoplist_for(datasets: &[LexeltDataset], path: Option<&Path>, seed: u64) -> Result<StopList> {
    Ok(match path {
        Some(p) => StopList::read(p)?,
        None => build_stoplist(datasets, seed, DEFAULT_SAMPLE_SIZE, DEFAULT_MIN_COUNT)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: &Path,
    system: &str,
    lang: Language,
    seed: u64,
    stoplist: Option<&Path>,
    overrides: &[String],
    out: &Path,
    exec: Exec,
) -> Result<()> {
    let mut cfg = build_system(system, lang)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("override {o:?} is not key=value"))?;
        cfg.apply_override(k.trim(), v.trim())?;
    }
    let datasets = read_canonical_all(data)?;
    let stop = stoplist_for(&datasets, stoplist, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for ds in &datasets {
        let trained = train_system(&cfg, ds, &stop, seed, exec)
            .with_context(|| format!("training {} on {}", cfg.name, ds.lexelt))?;
        let path = out.join(format!("{}.json", ds.lexelt));
        fs::write(&path, trained.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("{} models -> {}", datasets.len(), out.display());
    Ok(())
}

fn apply(models: &Path, data: &Path, out: &Path, exec: Exec) -> Result<()> {
    let datasets = read_canonical_all(data)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for ds in &datasets {
        let path = models.join(format!("{}.json", ds.lexelt));
        let text =
            fs::read_to_string(&path).with_context(|| format!("no model for {} at {}", ds.lexelt, path.display()))?;
        let trained = TrainedSystem::from_json(&text).with_context(|| format!("reading {}", path.display()))?;
        if trained.lexelt != ds.lexelt {
            bail!(
                "{} holds a model for {}, not {}",
                path.display(),
                trained.lexelt,
                ds.lexelt
            );
        }
        let answers = apply_system(&trained, &ds.test, exec)?;
        write_answers(&answers, out.join(format!("{}.ans", ds.lexelt)))?;
    }
    Ok(())
}
