//! Labeled sentence datasets: loading, stratified splitting and summary
//! statistics.
//!
//! Two on-disk layouts are understood. The polarity pair layout is two
//! plain-text files (one per class) with one sentence per line. The TSV
//! layout is `label<TAB>text` per line, where in tagged mode every token of
//! the text has the form `word_TAG`.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::embeddings::EmbeddingTable;
use crate::text::{self, Tagger};
use crate::{rng, Error, Result};

pub const NEGATIVE: u8 = 0;
pub const POSITIVE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub text: String,
    /// Filled by [`LabeledDataset::tokenize`] (or directly by tagged loaders).
    pub tokens: Vec<String>,
    /// One tag per token when present.
    pub pos_tags: Option<Vec<String>>,
    /// 0 = negative / non-aggressive, 1 = positive / aggressive.
    pub label: u8,
}

impl Example {
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        Example {
            text: text.into(),
            tokens: Vec::new(),
            pos_tags: None,
            label,
        }
    }

    /// An example whose tokens are given directly (no tokenizer pass).
    pub fn from_tokens(tokens: Vec<String>, pos_tags: Option<Vec<String>>, label: u8) -> Self {
        Example {
            text: tokens.join(" "),
            tokens,
            pos_tags,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub class_names: [String; 2],
    pub examples: Vec<Example>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Self {
        LabeledDataset {
            name: name.into(),
            class_names: ["negative".to_string(), "positive".to_string()],
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for e in &self.examples {
            counts[usize::from(e.label)] += 1;
        }
        counts
    }

    pub fn is_tagged(&self) -> bool {
        !self.examples.is_empty() && self.examples.iter().all(|e| e.pos_tags.is_some())
    }

    /// Tokenizes every example that has no tokens yet.
    pub fn tokenize(&mut self) {
        for e in &mut self.examples {
            if e.tokens.is_empty() {
                e.tokens = text::tokenize(&e.text);
            }
        }
    }

    /// Fills missing POS tags with `tagger`. Tags already present (for
    /// example from a tagged TSV file) are kept.
    pub fn tag(&mut self, tagger: &Tagger) {
        for e in &mut self.examples {
            if e.pos_tags.is_none() {
                e.pos_tags = Some(tagger.tag(&e.tokens));
            }
        }
    }

    /// Fails unless both classes occur.
    pub fn require_both_classes(&self) -> Result<()> {
        let [neg, pos] = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::invalid(format!(
                "dataset '{}' has a single class ({neg} negative, {pos} positive)",
                self.name
            )));
        }
        Ok(())
    }

    fn subset(&self, name: String, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name,
            class_names: self.class_names.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

fn read_lossy(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Loads the one-file-per-class layout. Positives come first.
pub fn load_polarity_pair(pos_path: &Path, neg_path: &Path) -> Result<LabeledDataset> {
    let mut examples = Vec::new();
    for (path, label) in [(pos_path, POSITIVE), (neg_path, NEGATIVE)] {
        let content = read_lossy(path)?;
        let before = examples.len();
        examples.extend(
            content
                .lines()
                .map(|l| l.trim_end_matches('\r'))
                .filter(|l| !l.trim().is_empty())
                .map(|l| Example::new(l, label)),
        );
        if examples.len() == before {
            return Err(Error::format(path, None, "no sentences found"));
        }
    }
    Ok(LabeledDataset::new(dataset_name(pos_path), examples))
}

/// Loads `label<TAB>text` lines. With `tagged`, tokens are `word_TAG` and the
/// tag is split off at the last underscore.
pub fn load_tsv(path: &Path, tagged: bool) -> Result<LabeledDataset> {
    let content = read_lossy(path)?;
    let mut examples = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, Some(line_no), "expected 'label<TAB>text'"))?;
        let label = match label.trim() {
            "0" => NEGATIVE,
            "1" => POSITIVE,
            other => {
                return Err(Error::format(
                    path,
                    Some(line_no),
                    format!("label must be 0 or 1, found '{other}'"),
                ))
            }
        };
        if !tagged {
            examples.push(Example::new(body, label));
            continue;
        }
        let mut words = Vec::new();
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for item in body.split_whitespace() {
            let (word, tag) = item
                .rsplit_once('_')
                .filter(|(w, t)| !w.is_empty() && !t.is_empty())
                .ok_or_else(|| {
                    Error::format(
                        path,
                        Some(line_no),
                        format!("token '{item}' is not of the form word_TAG"),
                    )
                })?;
            words.push(word);
            tokens.push(word.to_lowercase());
            tags.push(tag.to_uppercase());
        }
        examples.push(Example {
            text: words.join(" "),
            tokens,
            pos_tags: Some(tags),
            label,
        });
    }
    if examples.is_empty() {
        return Err(Error::format(path, None, "no examples found"));
    }
    Ok(LabeledDataset::new(dataset_name(path), examples))
}

/// Writes the TSV layout. Tagged examples are written as `word_TAG` tokens.
pub fn write_tsv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for e in &dataset.examples {
        match &e.pos_tags {
            Some(tags) => {
                let body: Vec<String> = e
                    .tokens
                    .iter()
                    .zip(tags)
                    .map(|(w, t)| format!("{w}_{t}"))
                    .collect();
                writeln!(out, "{}\t{}", e.label, body.join(" ")).expect("write to Vec");
            }
            None => writeln!(out, "{}\t{}", e.label, e.text.replace(['\t', '\n'], " "))
                .expect("write to Vec"),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Stratified, seeded split into `(train, eval)`.
///
/// The eval side receives `round(n * eval_fraction)` examples, allocated to
/// the two classes in proportion to their sizes.
pub fn split(
    dataset: &LabeledDataset,
    eval_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "eval fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let n = dataset.len();
    let n_eval = (n as f64 * eval_fraction).round() as usize;
    if n_eval == 0 || n_eval >= n {
        return Err(Error::invalid(format!(
            "splitting {n} examples at fraction {eval_fraction} leaves one side empty"
        )));
    }

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, e) in dataset.examples.iter().enumerate() {
        by_class[usize::from(e.label)].push(i);
    }
    let counts = [by_class[0].len(), by_class[1].len()];
    let mut eval_counts = [0usize; 2];
    eval_counts[0] = ((counts[0] * n_eval) as f64 / n as f64).round() as usize;
    eval_counts[0] = eval_counts[0]
        .min(counts[0])
        .max(n_eval.saturating_sub(counts[1]));
    eval_counts[1] = n_eval - eval_counts[0];

    let mut rng = rng::substream(seed, rng::SPLIT);
    let mut eval_idx = Vec::with_capacity(n_eval);
    let mut train_idx = Vec::with_capacity(n - n_eval);
    for (members, take) in by_class.iter_mut().zip(eval_counts) {
        members.shuffle(&mut rng);
        eval_idx.extend_from_slice(&members[..take]);
        train_idx.extend_from_slice(&members[take..]);
    }
    train_idx.shuffle(&mut rng);
    eval_idx.shuffle(&mut rng);

    Ok((
        dataset.subset(format!("{}-train", dataset.name), &train_idx),
        dataset.subset(format!("{}-eval", dataset.name), &eval_idx),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_classes: usize,
    pub avg_sentence_length: f64,
    pub n_sentences: usize,
    pub vocab_size: usize,
    pub vocab_in_model: usize,
}

impl CorpusStats {
    pub fn avg_sentence_length_rounded(&self) -> u64 {
        self.avg_sentence_length.round() as u64
    }

    /// One row in the layout of a corpus comparison table.
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{name} & {} & {} & {} & {} & {}",
            self.n_classes,
            self.avg_sentence_length_rounded(),
            self.n_sentences,
            self.vocab_size,
            self.vocab_in_model
        )
    }
}

/// Summary statistics over a tokenized dataset.
pub fn stats(dataset: &LabeledDataset, table: Option<&EmbeddingTable>) -> CorpusStats {
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut total_tokens = 0usize;
    let mut labels = [false; 2];
    for e in &dataset.examples {
        total_tokens += e.tokens.len();
        labels[usize::from(e.label)] = true;
        vocab.extend(e.tokens.iter().map(String::as_str));
    }
    let vocab_in_model = table.map_or(0, |t| vocab.iter().filter(|w| t.contains(w)).count());
    CorpusStats {
        n_classes: labels.iter().filter(|&&b| b).count(),
        avg_sentence_length: if dataset.is_empty() {
            0.0
        } else {
            total_tokens as f64 / dataset.len() as f64
        },
        n_sentences: dataset.len(),
        vocab_size: vocab.len(),
        vocab_in_model,
    }
}
