use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::config::{file_hash, Classifier, DataFormat, RunConfig};
use super::experiment::{check_gradients, evaluate, load_dataset, run_experiment, Predictor};
use super::metrics::RepeatSummary;
use super::persist::{load_model, save_model, Artifact, PinnedFile};
use super::synth::synth_aggression;
use crate::corpus::{split, stats, write_tsv};
use crate::embeddings::{load_table, nearest, save_table, train_sgns};
use crate::features::{featurize_dataset, load_lexicon, FEATURE_NAMES};
use crate::nn::Variant;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "aggro",
    version,
    about = "Aggression and sentiment sentence classifiers"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file, or for `polarity` the directory with rt-polarity.pos/.neg.
    #[arg(long)]
    dataset: PathBuf,
    /// polarity, tsv or tagged.
    #[arg(long, default_value = "tsv")]
    format: DataFormat,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// forest, word_cnn, pos_cnn or combined.
    #[arg(long)]
    classifier: Option<Classifier>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    /// Evaluate on this file instead of splitting the dataset.
    #[arg(long)]
    eval_dataset: Option<PathBuf>,
    /// Vector file, `train` or `none`.
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_fraction: Option<f64>,
    /// Any config key, e.g. `--set forest.n_trees=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics row: classes, avg length, sentences, vocabulary, vocabulary in the vector model.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Row label (defaults to the dataset name).
        #[arg(long)]
        name: Option<String>,
    },
    /// Stratified train/eval split written as TSV.
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.1)]
        eval_fraction: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        eval_out: PathBuf,
    },
    /// Train skip-gram vectors on a dataset's sentences.
    TrainEmbeddings {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// sgns.* keys, e.g. `--set sgns.dim=50`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Nearest neighbours of a word by cosine distance.
    Nearest {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
    /// Distance features per sentence as CSV.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier and evaluate it on the held-out split.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Metrics JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Repeat with seeds seed, seed+1, ... and report mean and stddev.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Record wall-clock seconds in the metrics.
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a saved model on a labeled dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Label sentences with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required = true)]
        text: Vec<String>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Finite-difference check of the CNN gradients in double precision.
    Gradcheck {
        /// word_cnn, pos_cnn, combined or all.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Write a synthetic aggression corpus, its vectors and seed lexicon.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Runs the command line tool and returns the process exit code:
/// 0 success, 1 data or configuration error, 2 usage error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn key_value(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &args.config {
        cfg.apply_file(p)?;
    }
    if let Some(c) = args.classifier {
        cfg.classifier = c;
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(e) = &args.eval_dataset {
        cfg.eval_dataset = Some(e.clone());
    }
    if let Some(e) = &args.embeddings {
        cfg.set("embeddings", e)?;
    }
    if let Some(l) = &args.lexicon {
        cfg.lexicon = Some(l.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.eval_fraction {
        cfg.eval_fraction = f;
    }
    for kv in &args.set {
        let (k, v) = key_value(kv)?;
        cfg.set(k, v)?;
    }
    cfg.finalize()?;
    Ok(cfg)
}

fn classifier_name(artifact: &Artifact) -> &'static str {
    match artifact {
        Artifact::Forest(_) => "forest",
        Artifact::Cnn(c) => c.config.variant.name(),
    }
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, content).map_err(|e| Error::io(p, e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Stats {
            data,
            embeddings,
            name,
        } => {
            let ds = load_dataset(&data.dataset, data.format)?;
            let table = embeddings.as_deref().map(load_table).transpose()?;
            let s = stats(&ds, table.as_ref());
            println!("dataset & classes & avg_length & sentences & vocabulary & in_model");
            println!("{}", s.table_row(name.as_deref().unwrap_or(&ds.name)));
        }
        Command::Split {
            data,
            eval_fraction,
            seed,
            train_out,
            eval_out,
        } => {
            let ds = load_dataset(&data.dataset, data.format)?;
            let (train, eval) = split(&ds, eval_fraction, seed)?;
            write_tsv(&train, &train_out)?;
            write_tsv(&eval, &eval_out)?;
            println!("train {} eval {}", train.len(), eval.len());
        }
        Command::TrainEmbeddings {
            data,
            out,
            seed,
            set,
        } => {
            let mut cfg = RunConfig::default();
            for kv in &set {
                let (k, v) = key_value(kv)?;
                if !k.starts_with("sgns.") {
                    return Err(Error::Config(format!(
                        "train-embeddings only accepts sgns.* keys, got '{k}'"
                    )));
                }
                cfg.set(k, v)?;
            }
            cfg.sgns.seed = seed;
            let ds = load_dataset(&data.dataset, data.format)?;
            let corpus: Vec<Vec<String>> = ds.examples.into_iter().map(|e| e.tokens).collect();
            let (table, report) = train_sgns(&corpus, &cfg.sgns)?;
            save_table(&table, &out)?;
            println!(
                "{} vectors of dimension {} from {} words; epoch losses {:?}",
                table.len(),
                table.dim(),
                report.train_words,
                report.epoch_losses
            );
        }
        Command::Nearest {
            embeddings,
            word,
            k,
        } => {
            let table = load_table(&embeddings)?;
            for (w, d) in nearest(&table, &word, k)? {
                println!("{w}\t{:.6}", 1.0 - d);
            }
        }
        Command::Featurize {
            data,
            embeddings,
            lexicon,
            out,
        } => {
            let ds = load_dataset(&data.dataset, data.format)?;
            let table = load_table(&embeddings)?;
            let lex = load_lexicon(&lexicon, &table)?;
            if !lex.skipped.is_empty() {
                log::warn!(
                    "{} lexicon entries not in the vector model: {:?}",
                    lex.skipped.len(),
                    lex.skipped
                );
            }
            let (x, y) = featurize_dataset(&ds, &lex, &table)?;
            let mut csv = format!("{},label\n", FEATURE_NAMES.join(","));
            for (row, label) in x.iter().zip(&y) {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                csv.push_str(&format!("{},{label}\n", cells.join(",")));
            }
            write_or_print(out.as_deref(), &csv)?;
        }
        Command::Train {
            run,
            model_out,
            out,
            repeats,
            timing,
        } => {
            if repeats == 0 {
                return Err(Error::Config("--repeats must be at least 1".into()));
            }
            let cfg = run_config(&run)?;
            let start = Instant::now();
            let mut first = run_experiment(&cfg)?;
            let seconds = start.elapsed().as_secs_f64();
            if repeats > 1 {
                let mut accuracies = vec![first.metrics.accuracy];
                for r in 1..repeats {
                    let mut c = cfg.clone();
                    c.seed = cfg.seed + r as u64;
                    c.finalize()?;
                    accuracies.push(run_experiment(&c)?.metrics.accuracy);
                }
                first.metrics.repeats = Some(RepeatSummary::new(accuracies));
            }
            if timing {
                first.metrics.wall_clock_seconds = Some(seconds);
            }
            if let Some(path) = &model_out {
                let mut artifact = first.artifact.clone();
                if let (Some(table), Artifact::Forest(f)) =
                    (&first.trained_embeddings, &mut artifact)
                {
                    let mut vec_path = path.clone().into_os_string();
                    vec_path.push(".vectors.txt");
                    let vec_path = PathBuf::from(vec_path);
                    save_table(table, &vec_path)?;
                    f.embeddings = PinnedFile {
                        sha256: file_hash(&vec_path)?,
                        path: vec_path,
                    };
                }
                save_model(path, &first.metrics.fingerprint, &artifact)?;
            }
            if let Some(report) = &first.report {
                for e in &report.epochs {
                    log::info!(
                        "epoch {}: loss {:.4} train {:.4} eval {:.4}",
                        e.epoch,
                        e.train_loss,
                        e.train_accuracy,
                        e.eval_accuracy
                    );
                }
            }
            if let Some(p) = &out {
                first.metrics.write(p)?;
            }
            println!("{}", first.metrics.table_row());
        }
        Command::Eval {
            model,
            data,
            embeddings,
            lexicon,
            out,
            timing,
        } => {
            let start = Instant::now();
            let file = load_model(&model, None)?;
            let predictor = Predictor::from_artifact(
                &file.artifact,
                embeddings.as_deref(),
                lexicon.as_deref(),
            )?;
            let ds = load_dataset(&data.dataset, data.format)?;
            let mut metrics = evaluate(
                &predictor,
                &ds,
                classifier_name(&file.artifact),
                &file.fingerprint,
            )?;
            if timing {
                metrics.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
            }
            if let Some(p) = &out {
                metrics.write(p)?;
            }
            println!("{}", metrics.table_row());
        }
        Command::Predict {
            model,
            text,
            embeddings,
            lexicon,
        } => {
            let file = load_model(&model, None)?;
            let predictor = Predictor::from_artifact(
                &file.artifact,
                embeddings.as_deref(),
                lexicon.as_deref(),
            )?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for t in &text {
                let p = predictor.predict_text(t)?;
                let detail = match p.votes {
                    Some(v) => format!("votes={}/{}", v[1], v[0] + v[1]),
                    None => format!("p={:.4}", p.score),
                };
                writeln!(lock, "{}\t{detail}", p.label).map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Command::Gradcheck {
            variant,
            seed,
            epsilon,
            samples,
        } => {
            let variants = if variant == "all" {
                vec![Variant::WordCnn, Variant::PosCnn, Variant::Combined]
            } else {
                vec![variant.parse()?]
            };
            let mut worst = 0f64;
            for v in variants {
                let report = check_gradients(v, seed, epsilon, samples)?;
                for t in &report.tensors {
                    println!(
                        "{}\t{}\t{}\t{:.3e}",
                        v.name(),
                        t.name,
                        t.checked,
                        t.max_relative_error
                    );
                }
                worst = worst.max(report.max_relative_error);
            }
            println!("max relative error {worst:.3e}");
            if !(worst < 1e-4) {
                return Err(Error::invalid(format!(
                    "gradient check failed: {worst:.3e} >= 1e-4"
                )));
            }
        }
        Command::Synth { n, seed, out_dir } => {
            let s = synth_aggression(n, seed)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            write_tsv(&s.dataset, &out_dir.join("synth.tsv"))?;
            save_table(&s.table, &out_dir.join("vectors.txt"))?;
            let lex = out_dir.join("lexicon.txt");
            fs::write(&lex, &s.lexicon).map_err(|e| Error::io(&lex, e))?;
            println!(
                "wrote {} sentences to {}",
                s.dataset.len(),
                out_dir.display()
            );
        }
    }
    Ok(())
}
