use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::SgnsConfig;
use crate::forest::ForestConfig;
use crate::nn::{ModelConfig, Variant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// A directory (or `.pos` file) holding `rt-polarity.pos` / `rt-polarity.neg`.
    Polarity,
    /// `label<TAB>sentence`
    Tsv,
    /// `label<TAB>word_TAG word_TAG ...`
    Tagged,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polarity" => Ok(DataFormat::Polarity),
            "tsv" => Ok(DataFormat::Tsv),
            "tagged" => Ok(DataFormat::Tagged),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (expected polarity, tsv or tagged)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Forest,
    WordCnn,
    PosCnn,
    Combined,
}

impl Classifier {
    pub fn variant(self) -> Option<Variant> {
        match self {
            Classifier::Forest => None,
            Classifier::WordCnn => Some(Variant::WordCnn),
            Classifier::PosCnn => Some(Variant::PosCnn),
            Classifier::Combined => Some(Variant::Combined),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Forest => "forest",
            Classifier::WordCnn => "word_cnn",
            Classifier::PosCnn => "pos_cnn",
            Classifier::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(Classifier::Forest),
            "word_cnn" => Ok(Classifier::WordCnn),
            "pos_cnn" => Ok(Classifier::PosCnn),
            "combined" => Ok(Classifier::Combined),
            other => Err(Error::Config(format!(
                "unknown classifier '{other}' (expected forest, word_cnn, pos_cnn or combined)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    File(PathBuf),
    /// Train skip-gram vectors on the training split.
    Train,
    /// Random initialization (CNN only).
    None,
}

impl std::str::FromStr for EmbeddingSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "train" => EmbeddingSource::Train,
            "none" | "random" => EmbeddingSource::None,
            path => EmbeddingSource::File(PathBuf::from(path)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: String,
    pub dataset: Option<PathBuf>,
    pub format: DataFormat,
    /// Separate evaluation set; when absent the dataset is split.
    pub eval_dataset: Option<PathBuf>,
    pub classifier: Classifier,
    pub embeddings: EmbeddingSource,
    pub lexicon: Option<PathBuf>,
    /// Tag untagged input with the built-in tagger.
    pub tagger: bool,
    pub tagger_lexicon: Option<PathBuf>,
    pub eval_fraction: f64,
    pub seed: u64,
    pub forest: ForestConfig,
    pub cnn: ModelConfig,
    pub sgns: SgnsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "run".into(),
            dataset: None,
            format: DataFormat::Tsv,
            eval_dataset: None,
            classifier: Classifier::WordCnn,
            embeddings: EmbeddingSource::None,
            lexicon: None,
            tagger: true,
            tagger_lexicon: None,
            eval_fraction: 0.1,
            seed: 1,
            forest: ForestConfig::default(),
            cnn: ModelConfig::default(),
            sgns: SgnsConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got '{value}'"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one `key = value` pair. Keys of classifier blocks carry a
    /// section prefix (`forest.n_trees`, `cnn.dropout`, `sgns.dim`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "task" => self.task = v.to_string(),
            "dataset" => self.dataset = optional_path(v),
            "format" => self.format = v.parse()?,
            "eval_dataset" => self.eval_dataset = optional_path(v),
            "classifier" => self.classifier = v.parse()?,
            "embeddings" => self.embeddings = v.parse()?,
            "lexicon" => self.lexicon = optional_path(v),
            "tagger" => {
                self.tagger =
                    v != "none" && parse_bool("tagger", if v == "builtin" { "true" } else { v })?
            }
            "tagger_lexicon" => self.tagger_lexicon = optional_path(v),
            "eval_fraction" => self.eval_fraction = parse("eval_fraction", v)?,
            "seed" => self.seed = parse("seed", v)?,

            "forest.n_trees" => self.forest.n_trees = parse(key, v)?,
            "forest.max_depth" => {
                self.forest.max_depth = if v == "none" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "forest.min_samples_leaf" => self.forest.min_samples_leaf = parse(key, v)?,
            "forest.features_per_split" => self.forest.features_per_split = v.parse()?,
            "forest.workers" => self.forest.workers = parse(key, v)?,

            "cnn.word_dim" => self.cnn.word_dim = parse(key, v)?,
            "cnn.pos_dim" => self.cnn.pos_dim = parse(key, v)?,
            "cnn.filter_widths" => {
                self.cnn.filter_widths = v
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "cnn.filters_per_width" => self.cnn.filters_per_width = parse(key, v)?,
            "cnn.merge_hidden" => self.cnn.merge_hidden = parse(key, v)?,
            "cnn.dropout" => self.cnn.dropout = parse(key, v)?,
            "cnn.max_len" => self.cnn.max_len = parse(key, v)?,
            "cnn.learning_rate" => self.cnn.learning_rate = parse(key, v)?,
            "cnn.batch_size" => self.cnn.batch_size = parse(key, v)?,
            "cnn.epochs" => self.cnn.epochs = parse(key, v)?,
            "cnn.train_embeddings" => self.cnn.train_embeddings = parse_bool(key, v)?,
            "cnn.min_count" => self.cnn.min_count = parse(key, v)?,

            "sgns.dim" => self.sgns.dim = parse(key, v)?,
            "sgns.window" => self.sgns.window = parse(key, v)?,
            "sgns.negatives" => self.sgns.negatives = parse(key, v)?,
            "sgns.epochs" => self.sgns.epochs = parse(key, v)?,
            "sgns.learning_rate" => self.sgns.learning_rate = parse(key, v)?,
            "sgns.min_learning_rate" => self.sgns.min_learning_rate = parse(key, v)?,
            "sgns.subsample" => self.sgns.subsample = parse(key, v)?,
            "sgns.min_count" => self.sgns.min_count = parse(key, v)?,
            "sgns.workers" => self.sgns.workers = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(path, Some(i + 1), "expected 'key = value'"))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::format(path, Some(i + 1), e.to_string()))?;
        }
        Ok(())
    }

    /// Propagates the global seed and classifier into the blocks and checks
    /// cross-field requirements.
    pub fn finalize(&mut self) -> Result<()> {
        self.forest.seed = self.seed;
        self.cnn.seed = self.seed;
        self.sgns.seed = self.seed;
        if let Some(v) = self.classifier.variant() {
            self.cnn.variant = v;
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(Error::Config(format!(
                "eval_fraction must lie in (0, 1), got {}",
                self.eval_fraction
            )));
        }
        match self.classifier {
            Classifier::Forest => {
                if self.lexicon.is_none() {
                    return Err(Error::Config(
                        "the forest classifier requires --lexicon".into(),
                    ));
                }
                if self.embeddings == EmbeddingSource::None {
                    return Err(Error::Config(
                        "the forest classifier requires --embeddings (a vector file or 'train')"
                            .into(),
                    ));
                }
                self.forest.validate()?;
            }
            c => {
                if c.variant().is_some_and(Variant::uses_pos)
                    && !self.tagger
                    && self.format != DataFormat::Tagged
                {
                    return Err(Error::Config(format!(
                        "{} needs POS tags: use tagged input or enable the tagger",
                        c.name()
                    )));
                }
                self.cnn.validate()?;
            }
        }
        if self.embeddings == EmbeddingSource::Train {
            self.sgns.validate()?;
        }
        Ok(())
    }

    /// Hash of the configuration and code version.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.update(b"\0");
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        hex(&h.finalize()[..8])
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's contents, hex encoded.
pub fn file_hash(path: &Path) -> Result<String> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}
