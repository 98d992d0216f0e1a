//! Word embedding tables: text-format I/O, cosine distance, neighbour
//! queries, vocabulary-aligned initialization and a skip-gram
//! negative-sampling trainer.

use std::cell::Cell;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::Vocabulary;
use crate::{rng, Error, Result};

/// Word to dense vector map with a fixed dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn from_rows(
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Result<Self> {
        let mut table = Self::new(dim)?;
        for (word, vector) in rows {
            table.insert(word, &vector)?;
        }
        Ok(table)
    }

    /// Inserts or replaces the vector of `word`. Returns true on replacement.
    pub fn insert(&mut self, word: String, vector: &[f32]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for '{word}' has {} components, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(&i) = self.index.get(&word) {
            self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Words in insertion order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }
}

/// Reads the text vector format: an optional `<count> <dim>` header, then
/// `word v1 ... v_dim` per line. Without a header the dimension comes from
/// the first row. Duplicate words keep the last vector.
pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let content = String::from_utf8_lossy(&bytes);
    let mut lines = content.lines().enumerate().peekable();
    let mut declared: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split(' ').filter(|f| !f.is_empty()).collect();
        if fields.len() == 2 {
            if let (Ok(count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                declared = Some((count, dim));
                lines.next();
            }
        }
    }
    let mut table: Option<EmbeddingTable> = declared
        .map(|(_, dim)| EmbeddingTable::new(dim))
        .transpose()?;
    let mut vector = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields
            .next()
            .expect("non-empty line has a field")
            .to_string();
        vector.clear();
        for f in fields {
            let v: f32 = f.parse().map_err(|_| {
                Error::format(
                    path,
                    Some(line_no),
                    format!("cannot parse '{f}' as a number"),
                )
            })?;
            vector.push(v);
        }
        if table.is_none() {
            table =
                Some(EmbeddingTable::new(vector.len()).map_err(|_| {
                    Error::format(path, Some(line_no), "row has no vector components")
                })?);
        }
        let t = table.as_mut().expect("initialized above");
        if vector.len() != t.dim() {
            return Err(Error::format(
                path,
                Some(line_no),
                format!("expected {} components, found {}", t.dim(), vector.len()),
            ));
        }
        if t.insert(word.clone(), &vector)? {
            log::warn!(
                "{}:{line_no}: duplicate word '{word}', keeping the last vector",
                path.display()
            );
        }
    }
    let table = table.ok_or_else(|| Error::format(path, None, "no header and no vectors"))?;
    if let Some((count, _)) = declared {
        if count != table.len() {
            log::warn!(
                "{}: header declares {count} words, read {}",
                path.display(),
                table.len()
            );
        }
    }
    Ok(table)
}

/// Writes the text vector format with nine significant digits, which is
/// exact for single precision.
pub fn save_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(table.len() * (table.dim() * 16 + 16));
    writeln!(out, "{} {}", table.len(), table.dim()).expect("write to Vec");
    for (word, vector) in table.iter() {
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "word {word:?} cannot be stored in the space-separated vector format"
            )));
        }
        out.extend_from_slice(word.as_bytes());
        for v in vector {
            write!(out, " {v:.8e}").expect("write to Vec");
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `1 - cos(u, v)`, in `[0, 2]`. A zero vector on either side gives 1.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        log::debug!("cosine distance with a zero vector, using 1");
        return 1.0;
    }
    (1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0)
}

/// The `k` nearest other words by cosine distance, ascending, ties by word.
pub fn nearest(table: &EmbeddingTable, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let query = table
        .get(word)
        .ok_or_else(|| Error::invalid(format!("word '{word}' is not in the embedding table")))?;
    let mut scored: Vec<(String, f64)> = table
        .iter()
        .filter(|(w, _)| *w != word)
        .map(|(w, v)| (w.to_string(), cosine_distance(query, v)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Vocabulary-aligned embedding rows. Row 0 (PAD) is zero and stays zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub const RANDOM_INIT_RANGE: f32 = 0.25;

/// Copies pretrained vectors for words found in `table`; every other row
/// except PAD (including UNK) is drawn uniformly from `[-0.25, 0.25]`.
pub fn init_for_vocab(
    table: Option<&EmbeddingTable>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if let Some(t) = table {
        if t.dim() != dim {
            return Err(Error::invalid(format!(
                "embedding table has dimension {}, model expects {dim}",
                t.dim()
            )));
        }
    }
    let rows = vocab.len();
    let mut data = vec![0f32; rows * dim];
    let mut rng = rng::substream(seed, rng::INIT);
    for r in 1..rows {
        let dst = &mut data[r * dim..(r + 1) * dim];
        match vocab.token(r).and_then(|w| table.and_then(|t| t.get(w))) {
            Some(v) => dst.copy_from_slice(v),
            None => dst
                .iter_mut()
                .for_each(|x| *x = rng.gen_range(-RANDOM_INIT_RANGE..=RANDOM_INIT_RANGE)),
        }
    }
    Ok(EmbeddingMatrix {
        rows,
        dim,
        data,
        trainable: true,
    })
}

/// Skip-gram negative-sampling hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    pub subsample: f64,
    pub min_count: usize,
    pub seed: u64,
    /// 1 = strict mode (bit-deterministic). More workers run lock-free
    /// racy updates whose result depends on thread scheduling.
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            subsample: 1e-3,
            min_count: 5,
            seed: 1,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("min_count", self.min_count),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("sgns.{name} must be at least 1")));
        }
        if !(self.learning_rate > 0.0) || self.min_learning_rate < 0.0 {
            return Err(Error::Config("sgns learning rates must be positive".into()));
        }
        if !(self.subsample >= 0.0) {
            return Err(Error::Config("sgns.subsample must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgnsReport {
    pub vocab_size: usize,
    pub train_words: u64,
    /// Mean negative log-likelihood per (center, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Float storage shared by the strict (single thread) and racy trainers.
trait Store {
    fn get(&self, i: usize) -> f32;
    fn add(&self, i: usize, delta: f32);
}

struct Racy(Vec<AtomicU32>);

impl Store for Racy {
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    fn add(&self, i: usize, delta: f32) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Plain(Vec<Cell<f32>>);

impl Store for Plain {
    fn get(&self, i: usize) -> f32 {
        self.0[i].get()
    }
    fn add(&self, i: usize, delta: f32) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

struct Trainer<'a, S: Store> {
    config: &'a SgnsConfig,
    input: &'a S,
    output: &'a S,
    keep_prob: Vec<f64>,
    negatives: WeightedIndex<f64>,
    total_words: u64,
    processed: &'a AtomicU64,
}

impl<S: Store> Trainer<'_, S> {
    fn learning_rate(&self) -> f32 {
        let total = (self.config.epochs as u64 * self.total_words).max(1) as f64;
        let progress = (self.processed.load(Ordering::Relaxed) as f64 / total).min(1.0) as f32;
        let lr = self.config.learning_rate;
        (lr - (lr - self.config.min_learning_rate) * progress).max(self.config.min_learning_rate)
    }

    /// One pass over `sentences`; returns (loss sum, pair count).
    fn epoch(
        &self,
        sentences: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
        grad: &mut [f32],
    ) -> (f64, u64) {
        let dim = self.config.dim;
        let mut loss = 0f64;
        let mut pairs = 0u64;
        let mut kept = Vec::new();
        for sentence in sentences {
            let lr = self.learning_rate();
            kept.clear();
            for &w in sentence {
                if self.keep_prob[w] >= 1.0 || rng.gen::<f64>() < self.keep_prob[w] {
                    kept.push(w);
                }
            }
            self.processed
                .fetch_add(sentence.len() as u64, Ordering::Relaxed);
            for (i, &center) in kept.iter().enumerate() {
                let span = rng.gen_range(1..=self.config.window);
                let lo = i.saturating_sub(span);
                let hi = (i + span).min(kept.len() - 1);
                for (j, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let vin = center * dim;
                    for k in 0..=self.config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let t = self.negatives.sample(rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let vout = target * dim;
                        let mut dot = 0f32;
                        for d in 0..dim {
                            dot += self.input.get(vin + d) * self.output.get(vout + d);
                        }
                        let p = sigmoid(dot);
                        let likelihood = if label > 0.0 { p } else { 1.0 - p };
                        loss -= f64::from(likelihood.max(1e-7)).ln();
                        let g = (label - p) * lr;
                        for (d, gd) in grad.iter_mut().enumerate() {
                            *gd += g * self.output.get(vout + d);
                            self.output.add(vout + d, g * self.input.get(vin + d));
                        }
                    }
                    for (d, gd) in grad.iter().enumerate() {
                        self.input.add(vin + d, *gd);
                    }
                    pairs += 1;
                }
            }
        }
        (loss, pairs)
    }
}

/// Trains skip-gram with negative sampling and returns the input vectors.
///
/// Negatives come from the unigram distribution raised to the 3/4 power,
/// the context window is drawn uniformly from `1..=window` per position and
/// frequent words are subsampled. With `workers == 1` the result is a pure
/// function of the corpus and config.
pub fn train_sgns(
    corpus: &[Vec<String>],
    config: &SgnsConfig,
) -> Result<(EmbeddingTable, SgnsReport)> {
    config.validate()?;
    if corpus.iter().all(Vec::is_empty) {
        return Err(Error::invalid("cannot train embeddings on an empty corpus"));
    }
    let vocab = Vocabulary::from_token_lists(corpus.iter().map(Vec::as_slice), config.min_count);
    let n_words = vocab.words().len();
    if n_words < 2 {
        return Err(Error::invalid(format!(
            "only {n_words} word(s) reach min_count {}; need at least 2",
            config.min_count
        )));
    }
    // Dense ids 0..n_words, i.e. vocabulary index minus the reserved slots.
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| vocab.get(t))
                .filter(|&i| i >= Vocabulary::RESERVED)
                .map(|i| i - Vocabulary::RESERVED)
                .collect()
        })
        .collect();
    let mut counts = vec![0u64; n_words];
    for s in &sentences {
        for &w in s {
            counts[w] += 1;
        }
    }
    let total_words: u64 = counts.iter().sum();
    let threshold = config.subsample * total_words as f64;
    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if config.subsample == 0.0 {
                1.0
            } else {
                let c = c as f64;
                ((c / threshold).sqrt() + 1.0) * threshold / c
            }
        })
        .collect();
    let negatives = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::invalid(format!("negative sampling table: {e}")))?;

    let dim = config.dim;
    let mut init_rng = rng::substream(config.seed, rng::INIT);
    let init: Vec<f32> = (0..n_words * dim)
        .map(|_| (init_rng.gen::<f32>() - 0.5) / dim as f32)
        .collect();
    let processed = AtomicU64::new(0);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    let vectors: Vec<f32> = if config.workers == 1 {
        let input = Plain(init.into_iter().map(Cell::new).collect());
        let output = Plain((0..n_words * dim).map(|_| Cell::new(0.0)).collect());
        let trainer = Trainer {
            config,
            input: &input,
            output: &output,
            keep_prob,
            negatives,
            total_words,
            processed: &processed,
        };
        let mut rng = rng::substream(config.seed, rng::SGNS);
        let mut grad = vec![0f32; dim];
        for _ in 0..config.epochs {
            let (loss, pairs) = trainer.epoch(&sentences, &mut rng, &mut grad);
            epoch_losses.push(loss / pairs.max(1) as f64);
        }
        input.0.into_iter().map(Cell::into_inner).collect()
    } else {
        let input = Racy(
            init.into_iter()
                .map(|v| AtomicU32::new(v.to_bits()))
                .collect(),
        );
        let output = Racy((0..n_words * dim).map(|_| AtomicU32::new(0)).collect());
        let trainer = Trainer {
            config,
            input: &input,
            output: &output,
            keep_prob,
            negatives,
            total_words,
            processed: &processed,
        };
        let shard = sentences.len().div_ceil(config.workers).max(1);
        let base_seed = rng::derive_seed(config.seed, rng::SGNS);
        let per_worker: Vec<Vec<(f64, u64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = sentences
                .chunks(shard)
                .enumerate()
                .map(|(w, chunk)| {
                    let trainer = &trainer;
                    scope.spawn(move || {
                        let mut rng = rng::indexed(base_seed, w as u64);
                        let mut grad = vec![0f32; dim];
                        (0..config.epochs)
                            .map(|_| trainer.epoch(chunk, &mut rng, &mut grad))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sgns worker panicked"))
                .collect()
        });
        for e in 0..config.epochs {
            let (loss, pairs) = per_worker
                .iter()
                .fold((0.0, 0), |(l, p), w| (l + w[e].0, p + w[e].1));
            epoch_losses.push(loss / pairs.max(1) as f64);
        }
        input
            .0
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()))
            .collect()
    };

    let table = EmbeddingTable::from_rows(
        dim,
        vocab
            .words()
            .iter()
            .cloned()
            .zip(vectors.chunks_exact(dim).map(<[f32]>::to_vec)),
    )?;
    let report = SgnsReport {
        vocab_size: n_words,
        train_words: total_words,
        epoch_losses,
    };
    Ok((table, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[(&str, &[f32])]) -> EmbeddingTable {
        let dim = rows[0].1.len();
        EmbeddingTable::from_rows(dim, rows.iter().map(|(w, v)| (w.to_string(), v.to_vec())))
            .unwrap()
    }

    #[test]
    fn load_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        fs::write(&p, "2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        let t = load_table(&p).unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
        assert_eq!(t.get("b").unwrap(), &[0.0, 1.0, 0.0]);

        fs::write(&p, "a 1 2\nb 3 4 \n").unwrap();
        let t = load_table(&p).unwrap();
        assert_eq!((t.dim(), t.len()), (2, 2));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        fs::write(&p, "2 3\na 1 0 0\nb 0 1\n").unwrap();
        assert!(matches!(
            load_table(&p),
            Err(Error::Format { line: Some(3), .. })
        ));
        fs::write(&p, "a 1 x\n").unwrap();
        assert!(matches!(
            load_table(&p),
            Err(Error::Format { line: Some(1), .. })
        ));
    }

    #[test]
    fn duplicate_words_keep_last() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        fs::write(&p, "a 1 0\na 0 1\n").unwrap();
        let t = load_table(&p).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("a").unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn save_edge_cases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        save_table(&EmbeddingTable::new(4).unwrap(), &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "0 4\n");
        let bad = table(&[("two words", &[1.0])]);
        assert!(save_table(&bad, &p).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert!(cosine_distance(&[0.3, -1.2, 5.0], &[0.3, -1.2, 5.0]).abs() < 1e-12);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]), 2.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn nearest_examples() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[1.0, 0.0]), ("c", &[0.0, 1.0])]);
        assert_eq!(
            nearest(&t, "a", 2).unwrap(),
            vec![("b".to_string(), 0.0), ("c".to_string(), 1.0)]
        );
        assert_eq!(nearest(&t, "a", 10).unwrap().len(), 2);
        let err = nearest(&t, "zzz", 1).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn init_copies_pretrained_and_randomizes_rest() {
        let vocab = Vocabulary::from_words(["a".to_string(), "b".to_string()]);
        let t = table(&[("a", &[1.0, 2.0, 3.0])]);
        let m = init_for_vocab(Some(&t), &vocab, 3, 5).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(vocab.get("a")), &[1.0, 2.0, 3.0]);
        assert!(m.row(vocab.get("b")).iter().all(|x| x.abs() <= 0.25));
        assert!(init_for_vocab(Some(&t), &vocab, 4, 5).is_err());

        let r = init_for_vocab(None, &vocab, 8, 9).unwrap();
        assert!(r.row(0).iter().all(|&x| x == 0.0));
        assert!((1..r.rows).all(|i| r.row(i).iter().all(|x| x.abs() <= 0.25)));
        assert!(r.row(1).iter().any(|&x| x != 0.0));
        assert_eq!(r, init_for_vocab(None, &vocab, 8, 9).unwrap());
    }

    #[test]
    fn sgns_rejects_degenerate() {
        let cfg = SgnsConfig {
            min_count: 1,
            ..SgnsConfig::default()
        };
        assert!(train_sgns(&[], &cfg).is_err());
        assert!(train_sgns(&[vec!["x".to_string(), "x".to_string()]], &cfg).is_err());
        let bad = SgnsConfig { window: 0, ..cfg };
        assert!(train_sgns(&[vec!["x".into(), "y".into()]], &bad).is_err());
    }

    #[test]
    fn sgns_loss_decreases_on_repeated_sentence() {
        let corpus = vec![vec!["x".to_string(), "y".to_string()]; 200];
        let cfg = SgnsConfig {
            dim: 10,
            window: 1,
            negatives: 1,
            epochs: 10,
            subsample: 0.0,
            min_count: 1,
            ..SgnsConfig::default()
        };
        let (table, report) = train_sgns(&corpus, &cfg).unwrap();
        assert_eq!(table.len(), 2);
        let first = report.epoch_losses[0];
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < first, "{:?}", report.epoch_losses);
    }

    #[test]
    fn sgns_fast_mode_runs() {
        let corpus: Vec<Vec<String>> = (0..200)
            .map(|i| (0..6).map(|j| format!("w{}", (i + j) % 9)).collect())
            .collect();
        let cfg = SgnsConfig {
            dim: 8,
            workers: 3,
            min_count: 1,
            epochs: 2,
            ..SgnsConfig::default()
        };
        let (table, report) = train_sgns(&corpus, &cfg).unwrap();
        assert_eq!(table.len(), 9);
        assert_eq!(report.epoch_losses.len(), 2);
        assert!(table.iter().all(|(_, v)| v.iter().all(|x| x.is_finite())));
    }

    proptest! {
        #[test]
        fn save_load_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, 3), 1..10)) {
            let t = EmbeddingTable::from_rows(3, rows.into_iter().enumerate().map(|(i, v)| (format!("w{i}"), v))).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("v.txt");
            save_table(&t, &p).unwrap();
            let back = load_table(&p).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-10f32..10.0, 4),
            v in proptest::collection::vec(-10f32..10.0, 4),
            alpha in 0.01f32..100.0,
        ) {
            let d = cosine_distance(&u, &v);
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert_eq!(d, cosine_distance(&v, &u));
            let scaled: Vec<f32> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine_distance(&scaled, &v) - d).abs() < 1e-5);
        }
    }
}
