use std::path::{Path, PathBuf};

use log::info;

use super::config::{file_hash, Classifier, DataFormat, EmbeddingSource, RunConfig};
use super::metrics::Metrics;
use super::persist::{Artifact, CnnArtifact, ForestArtifact, PinnedFile};
use crate::corpus::{load_polarity_pair, load_tsv, split, LabeledDataset};
use crate::embeddings::{load_table, train_sgns, EmbeddingTable};
use crate::features::{
    featurize_dataset, featurize_sentence, load_lexicon, SeedLexicon, FEATURE_NAMES,
};
use crate::forest::{train_forest, Forest};
use crate::nn::{encode_dataset, train_model, Model, TrainReport};
use crate::text::{tokenize, Tagger};
use crate::{Error, Result};

/// Loads and tokenizes a dataset. For `polarity`, `path` is a directory
/// holding `rt-polarity.pos` and `rt-polarity.neg`, or the `.pos` file.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<LabeledDataset> {
    let mut ds = match format {
        DataFormat::Polarity => {
            let (pos, neg) = if path.is_dir() {
                (path.join("rt-polarity.pos"), path.join("rt-polarity.neg"))
            } else {
                (path.to_path_buf(), path.with_extension("neg"))
            };
            let mut ds = load_polarity_pair(&pos, &neg)?;
            let dir = if path.is_dir() {
                path
            } else {
                path.parent().unwrap_or(path)
            };
            if let Some(name) = dir.file_name() {
                ds.name = name.to_string_lossy().into_owned();
            }
            ds
        }
        DataFormat::Tsv => load_tsv(path, false)?,
        DataFormat::Tagged => load_tsv(path, true)?,
    };
    ds.tokenize();
    if let Some(i) = ds.examples.iter().position(|e| e.tokens.is_empty()) {
        return Err(Error::format(
            path,
            None,
            format!("example {i} has no tokens"),
        ));
    }
    Ok(ds)
}

pub fn build_tagger(lexicon: Option<&Path>) -> Result<Tagger> {
    match lexicon {
        Some(p) => Tagger::with_lexicon_file(p),
        None => Ok(Tagger::builtin()),
    }
}

fn pin(path: &Path) -> Result<PinnedFile> {
    Ok(PinnedFile {
        path: path.to_path_buf(),
        sha256: file_hash(path)?,
    })
}

/// A trained classifier ready to label tokenized sentences.
pub enum Predictor {
    Forest {
        forest: Forest,
        table: EmbeddingTable,
        lexicon: SeedLexicon,
    },
    Cnn {
        model: Model<f32>,
        tagger: Option<Tagger>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    /// Probability (CNN) or vote share (forest) of class 1.
    pub score: f64,
    pub votes: Option<[usize; 2]>,
}

impl Predictor {
    /// Rebuilds a predictor from a stored artifact. For forests, the
    /// embedding and lexicon files (overridable) must hash to the values
    /// recorded at training time.
    pub fn from_artifact(
        artifact: &Artifact,
        embeddings: Option<&Path>,
        lexicon: Option<&Path>,
    ) -> Result<Self> {
        match artifact {
            Artifact::Forest(f) => {
                let check = |pinned: &PinnedFile,
                             given: Option<&Path>,
                             what: &str|
                 -> Result<PathBuf> {
                    let path = given.map_or_else(|| pinned.path.clone(), Path::to_path_buf);
                    let hash = file_hash(&path)?;
                    if hash != pinned.sha256 {
                        return Err(Error::Config(format!(
                            "fingerprint mismatch: {what} file {} differs from the one the model was trained with",
                            path.display()
                        )));
                    }
                    Ok(path)
                };
                let emb_path = check(&f.embeddings, embeddings, "embedding")?;
                let lex_path = check(&f.lexicon, lexicon, "lexicon")?;
                let table = load_table(&emb_path)?;
                let lexicon = load_lexicon(&lex_path, &table)?;
                Ok(Predictor::Forest {
                    forest: f.forest.clone(),
                    table,
                    lexicon,
                })
            }
            Artifact::Cnn(c) => {
                let tagger = if c.tagger && c.config.variant.uses_pos() {
                    if let Some(p) = &c.tagger_lexicon {
                        if file_hash(&p.path)? != p.sha256 {
                            return Err(Error::Config(format!(
                                "fingerprint mismatch: tagger lexicon {} changed since training",
                                p.path.display()
                            )));
                        }
                    }
                    Some(build_tagger(
                        c.tagger_lexicon.as_ref().map(|p| p.path.as_path()),
                    )?)
                } else {
                    None
                };
                Ok(Predictor::Cnn {
                    model: c.model()?,
                    tagger,
                })
            }
        }
    }

    pub fn predict_dataset(&self, dataset: &LabeledDataset) -> Result<Vec<Prediction>> {
        match self {
            Predictor::Forest {
                forest,
                table,
                lexicon,
            } => {
                let (x, _) = featurize_dataset(dataset, lexicon, table)?;
                Ok(x.iter()
                    .map(|row| {
                        let (label, votes) = forest.predict(row);
                        Prediction {
                            label,
                            score: votes[1] as f64 / forest.trees.len() as f64,
                            votes: Some(votes),
                        }
                    })
                    .collect())
            }
            Predictor::Cnn { model, tagger } => {
                let mut ds = dataset.clone();
                if let Some(t) = tagger {
                    ds.tag(t);
                }
                let encoded = encode_dataset(model, &ds)?;
                Ok(model
                    .predict_batch(&encoded)?
                    .into_iter()
                    .map(|p| Prediction {
                        label: u8::from(p[1] > p[0]),
                        score: p[1],
                        votes: None,
                    })
                    .collect())
            }
        }
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::invalid("the text has no tokens"));
        }
        if let Predictor::Forest {
            forest,
            table,
            lexicon,
        } = self
        {
            let f = featurize_sentence(&tokens, lexicon, table)?.to_array();
            let (label, votes) = forest.predict(&f);
            return Ok(Prediction {
                label,
                score: votes[1] as f64 / forest.trees.len() as f64,
                votes: Some(votes),
            });
        }
        let ds = LabeledDataset::new(
            "text",
            vec![crate::corpus::Example::from_tokens(tokens, None, 0)],
        );
        Ok(self.predict_dataset(&ds)?[0])
    }
}

pub fn evaluate(
    predictor: &Predictor,
    eval: &LabeledDataset,
    classifier: &str,
    fingerprint: &str,
) -> Result<Metrics> {
    if eval.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let predicted: Vec<u8> = predictor
        .predict_dataset(eval)?
        .iter()
        .map(|p| p.label)
        .collect();
    Metrics::from_predictions(
        &eval.labels(),
        &predicted,
        &eval.name,
        classifier,
        fingerprint,
    )
}

pub struct RunOutput {
    pub artifact: Artifact,
    pub metrics: Metrics,
    pub report: Option<TrainReport>,
    /// Vectors trained during the run (embedding source `train`).
    pub trained_embeddings: Option<EmbeddingTable>,
    pub train_size: usize,
}

/// Train/eval datasets for a run: a separate eval file, or a stratified
/// split of the dataset.
pub fn load_run_data(cfg: &RunConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset given (--dataset)".into()))?;
    let ds = load_dataset(path, cfg.format)?;
    match &cfg.eval_dataset {
        Some(e) => Ok((ds, load_dataset(e, cfg.format)?)),
        None => split(&ds, cfg.eval_fraction, cfg.seed),
    }
}

/// Trains the configured classifier on `train` and evaluates it on `eval`.
/// `cfg` must have been finalized.
pub fn run_on(
    cfg: &RunConfig,
    mut train: LabeledDataset,
    mut eval: LabeledDataset,
) -> Result<RunOutput> {
    train.require_both_classes()?;
    let fingerprint = cfg.fingerprint();
    let (table, trained) = match &cfg.embeddings {
        EmbeddingSource::File(p) => (Some(load_table(p)?), false),
        EmbeddingSource::Train => {
            let corpus: Vec<Vec<String>> =
                train.examples.iter().map(|e| e.tokens.clone()).collect();
            let (t, report) = train_sgns(&corpus, &cfg.sgns)?;
            info!(
                "trained {} vectors, final epoch loss {:?}",
                t.len(),
                report.epoch_losses.last()
            );
            (Some(t), true)
        }
        EmbeddingSource::None => (None, false),
    };
    info!("train {} / eval {} sentences", train.len(), eval.len());

    let (artifact, predictor, report) = match cfg.classifier {
        Classifier::Forest => {
            let table = table.expect("finalized forest config has embeddings");
            let lex_path = cfg
                .lexicon
                .as_deref()
                .expect("finalized forest config has a lexicon");
            let lexicon = load_lexicon(lex_path, &table)?;
            let (x, y) = featurize_dataset(&train, &lexicon, &table)?;
            let x: Vec<Vec<f64>> = x.into_iter().map(|r| r.to_vec()).collect();
            let forest = train_forest(&x, &y, &FEATURE_NAMES, &cfg.forest)?;
            let embeddings = match &cfg.embeddings {
                EmbeddingSource::File(p) => pin(p)?,
                // Filled in once the trained vectors are written out.
                _ => PinnedFile {
                    path: PathBuf::new(),
                    sha256: String::new(),
                },
            };
            let artifact = Artifact::Forest(ForestArtifact {
                forest: forest.clone(),
                embeddings,
                lexicon: pin(lex_path)?,
            });
            let predictor = Predictor::Forest {
                forest,
                table: table.clone(),
                lexicon,
            };
            (artifact, predictor, None)
        }
        _ => {
            let mut mc = cfg.cnn.clone();
            if let Some(t) = &table {
                mc.word_dim = t.dim();
            }
            let tagger = if mc.variant.uses_pos() && cfg.tagger {
                let t = build_tagger(cfg.tagger_lexicon.as_deref())?;
                train.tag(&t);
                eval.tag(&t);
                Some(t)
            } else {
                None
            };
            let (model, report) = train_model(&mc, &train, &eval, table.as_ref())?;
            let tagger_pin = cfg.tagger_lexicon.as_deref().map(pin).transpose()?;
            let artifact = Artifact::Cnn(CnnArtifact::from_model(&model, cfg.tagger, tagger_pin));
            (artifact, Predictor::Cnn { model, tagger }, Some(report))
        }
    };
    let metrics = evaluate(&predictor, &eval, cfg.classifier.name(), &fingerprint)?;
    let trained_embeddings = if trained {
        match predictor {
            Predictor::Forest { table, .. } => Some(table),
            Predictor::Cnn { .. } => None,
        }
    } else {
        None
    };
    Ok(RunOutput {
        artifact,
        metrics,
        report,
        trained_embeddings,
        train_size: train.len(),
    })
}

/// Loads the data named by `cfg`, trains and evaluates.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let (train, eval) = load_run_data(cfg)?;
    run_on(cfg, train, eval)
}

/// Gradient check of one CNN variant in double precision on a small
/// synthetic batch, with frozen dropout masks.
pub fn check_gradients(
    variant: crate::nn::Variant,
    seed: u64,
    epsilon: f64,
    per_tensor: usize,
) -> Result<crate::nn::GradCheckReport> {
    use crate::nn::{grad_check, BatchObjective, ModelConfig};
    use crate::text::Vocabulary;

    let synth = super::synth::synth_aggression(24, seed)?;
    let examples = &synth.dataset.examples;
    let vocab = Vocabulary::from_token_lists(examples.iter().map(|e| e.tokens.as_slice()), 1);
    let config = ModelConfig {
        variant,
        word_dim: 8,
        pos_dim: 5,
        filters_per_width: 6,
        merge_hidden: 8,
        max_len: 24,
        seed,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(config, vocab, Vocabulary::tagset(), None)?;
    let encoded = examples
        .iter()
        .map(|e| model.encode(&e.tokens, e.pos_tags.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    let labels = examples.iter().map(|e| e.label).collect();
    let mut rng = crate::rng::substream(seed, crate::rng::DROPOUT);
    let masks = encoded
        .iter()
        .map(|_| model.sample_mask(&mut rng))
        .collect();
    let mut objective = BatchObjective::new(model, encoded.iter().collect(), labels, Some(masks))?;
    Ok(grad_check(&mut objective, epsilon, per_tensor, seed))
}
