//! Embedding-distance sentence features for the forest classifier.
//!
//! Every token gets a distance to a seed lexicon (the minimum cosine
//! distance to any seed entry), and a sentence is summarized by four
//! numbers: the sum, mean and range (max - min) of its token distances and
//! its length in tokens.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDataset;
use crate::embeddings::{cosine_distance, EmbeddingTable};
use crate::text::tokenize;
use crate::{Error, Result};

pub const N_FEATURES: usize = 4;
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["sum_dist", "mean_dist", "range_dist", "length"];

/// Distance given to tokens missing from the embedding table.
pub const OOV_DISTANCE: f64 = 1.0;

/// Seed words and phrases with their vectors. A phrase is represented by
/// the mean of its in-table word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedLexicon {
    pub entries: Vec<(String, Vec<f32>)>,
    /// Entries none of whose words are in the table.
    pub skipped: Vec<String>,
}

impl SeedLexicon {
    pub fn from_phrases<S: AsRef<str>>(
        phrases: impl IntoIterator<Item = S>,
        table: &EmbeddingTable,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        let mut skipped = Vec::new();
        for phrase in phrases {
            let phrase = phrase.as_ref().trim();
            if phrase.is_empty() {
                continue;
            }
            let vectors: Vec<&[f32]> = tokenize(phrase)
                .iter()
                .filter_map(|w| table.get(w))
                .collect();
            if vectors.is_empty() {
                skipped.push(phrase.to_string());
                continue;
            }
            let mut mean = vec![0f64; table.dim()];
            for v in &vectors {
                for (m, &x) in mean.iter_mut().zip(v.iter()) {
                    *m += f64::from(x);
                }
            }
            let n = vectors.len() as f64;
            entries.push((
                phrase.to_string(),
                mean.into_iter().map(|m| (m / n) as f32).collect(),
            ));
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!(
                "lexicon disjoint from embedding model ({} entries skipped)",
                skipped.len()
            )));
        }
        if !skipped.is_empty() {
            log::warn!(
                "{} lexicon entries have no word in the embedding table: {:?}",
                skipped.len(),
                skipped
            );
        }
        Ok(SeedLexicon { entries, skipped })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One word or phrase per line; `#` lines are comments.
pub fn load_lexicon(path: &Path, table: &EmbeddingTable) -> Result<SeedLexicon> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let phrases = content
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim_start().starts_with('#'));
    SeedLexicon::from_phrases(phrases, table).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::format(path, None, msg),
        other => other,
    })
}

/// Minimum cosine distance from `word` to any seed entry, or
/// [`OOV_DISTANCE`] when the word has no vector.
pub fn word_distance(word: &str, lexicon: &SeedLexicon, table: &EmbeddingTable) -> f64 {
    match table.get(word) {
        None => OOV_DISTANCE,
        Some(v) => lexicon
            .entries
            .iter()
            .map(|(_, s)| cosine_distance(v, s))
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sum_dist: f64,
    pub mean_dist: f64,
    pub range_dist: f64,
    pub length: f64,
}

impl FeatureVector {
    fn from_distances(distances: &[f64]) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::invalid("cannot featurize an empty sentence"));
        }
        // Summing in sorted order makes the result independent of word order.
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        let sum: f64 = sorted.iter().sum();
        let z = sorted.len() as f64;
        Ok(FeatureVector {
            sum_dist: sum,
            mean_dist: sum / z,
            range_dist: sorted[sorted.len() - 1] - sorted[0],
            length: z,
        })
    }

    pub fn to_array(self) -> [f64; N_FEATURES] {
        [self.sum_dist, self.mean_dist, self.range_dist, self.length]
    }
}

pub fn featurize_sentence(
    tokens: &[String],
    lexicon: &SeedLexicon,
    table: &EmbeddingTable,
) -> Result<FeatureVector> {
    let distances: Vec<f64> = tokens
        .iter()
        .map(|t| word_distance(t, lexicon, table))
        .collect();
    FeatureVector::from_distances(&distances)
}

/// Feature rows in dataset order, plus the labels.
pub fn featurize_dataset(
    dataset: &LabeledDataset,
    lexicon: &SeedLexicon,
    table: &EmbeddingTable,
) -> Result<(Vec<[f64; N_FEATURES]>, Vec<u8>)> {
    // Distances are per word type, so compute each once.
    let mut types: Vec<&str> = dataset
        .examples
        .iter()
        .flat_map(|e| e.tokens.iter().map(String::as_str))
        .collect();
    types.sort_unstable();
    types.dedup();
    let cache: HashMap<&str, f64> = types
        .par_iter()
        .map(|&w| (w, word_distance(w, lexicon, table)))
        .collect();

    let rows = dataset
        .examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let d: Vec<f64> = e.tokens.iter().map(|t| cache[t.as_str()]).collect();
            FeatureVector::from_distances(&d)
                .map(FeatureVector::to_array)
                .map_err(|err| Error::invalid(format!("example {i}: {err}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, dataset.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn table(rows: &[(&str, [f32; 2])]) -> EmbeddingTable {
        EmbeddingTable::from_rows(2, rows.iter().map(|(w, v)| (w.to_string(), v.to_vec()))).unwrap()
    }

    #[test]
    fn lexicon_phrases_are_means() {
        let t = table(&[
            ("idiot", [1.0, 0.0]),
            ("shut", [1.0, 2.0]),
            ("up", [3.0, 0.0]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.txt");
        fs::write(&p, "# seeds\nidiot\nshut up\n").unwrap();
        let lex = load_lexicon(&p, &t).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.entries[1], ("shut up".to_string(), vec![2.0, 1.0]));
    }

    #[test]
    fn lexicon_errors() {
        let t = table(&[("a", [1.0, 0.0])]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.txt");
        fs::write(&p, "zzz\n").unwrap();
        assert!(load_lexicon(&p, &t).is_err());
        fs::write(&p, "# only a comment\n").unwrap();
        assert!(load_lexicon(&p, &t).is_err());
        let partial = SeedLexicon::from_phrases(["a", "qqq"], &t).unwrap();
        assert_eq!(partial.skipped, ["qqq"]);
    }

    #[test]
    fn word_distance_examples() {
        let t = table(&[("w", [1.0, 0.0]), ("s1", [0.0, 1.0]), ("s2", [1.0, 0.0])]);
        let lex = SeedLexicon::from_phrases(["s1", "s2"], &t).unwrap();
        assert_eq!(word_distance("s1", &lex, &t), 0.0);
        assert_eq!(word_distance("nope", &lex, &t), 1.0);
        assert_eq!(word_distance("w", &lex, &t), 0.0);
        let only_s1 = SeedLexicon::from_phrases(["s1"], &t).unwrap();
        assert_eq!(word_distance("w", &only_s1, &t), 1.0);
    }

    #[test]
    fn sentence_examples() {
        // Distances 0, 1 and 2 to the single seed (1, 0).
        let t = table(&[("s", [1.0, 0.0]), ("o", [0.0, 1.0]), ("n", [-1.0, 0.0])]);
        let lex = SeedLexicon::from_phrases(["s"], &t).unwrap();
        let f = featurize_sentence(&toks(&["s", "o", "n"]), &lex, &t).unwrap();
        assert_eq!(f.to_array(), [3.0, 1.0, 2.0, 3.0]);
        let f = featurize_sentence(&toks(&["s", "s", "s", "s"]), &lex, &t).unwrap();
        assert_eq!(f.to_array(), [0.0, 0.0, 0.0, 4.0]);
        assert!(featurize_sentence(&[], &lex, &t).is_err());
    }

    #[test]
    fn singleton_sentence() {
        // cos = 0.6 gives distance 0.4.
        let t = table(&[("s", [1.0, 0.0]), ("w", [0.6, 0.8])]);
        let lex = SeedLexicon::from_phrases(["s"], &t).unwrap();
        let f = featurize_sentence(&toks(&["w"]), &lex, &t).unwrap();
        assert!((f.sum_dist - 0.4).abs() < 1e-7);
        assert_eq!(f.sum_dist, f.mean_dist);
        assert_eq!((f.range_dist, f.length), (0.0, 1.0));
    }

    #[test]
    fn dataset_rows_follow_examples() {
        let t = table(&[("s", [1.0, 0.0]), ("o", [0.0, 1.0])]);
        let lex = SeedLexicon::from_phrases(["s"], &t).unwrap();
        let mut d = LabeledDataset::new("t", vec![Example::new("s o", 1), Example::new("o", 0)]);
        d.tokenize();
        let (x, y) = featurize_dataset(&d, &lex, &t).unwrap();
        assert_eq!(x, vec![[1.0, 0.5, 1.0, 2.0], [1.0, 1.0, 0.0, 1.0]]);
        assert_eq!(y, vec![1, 0]);
        d.examples.reverse();
        let (xr, _) = featurize_dataset(&d, &lex, &t).unwrap();
        assert_eq!(xr, vec![x[1], x[0]]);

        d.examples.push(Example::new("", 0));
        let err = featurize_dataset(&d, &lex, &t).unwrap_err();
        assert!(err.to_string().contains("example 2"));
    }

    fn vec2() -> impl Strategy<Value = [f32; 2]> {
        [-1f32..1.0, -1f32..1.0]
    }

    proptest! {
        #[test]
        fn order_invariance_and_bounds(
            vectors in proptest::collection::vec(vec2(), 2..12),
            order in proptest::collection::vec(0usize..64, 1..15),
            seed in 0usize..12,
        ) {
            let rows: Vec<(String, Vec<f32>)> = vectors.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.to_vec())).collect();
            let t = EmbeddingTable::from_rows(2, rows).unwrap();
            let lex = SeedLexicon::from_phrases([format!("w{}", seed % vectors.len())], &t).unwrap();
            let tokens: Vec<String> = order.iter().map(|i| format!("w{}", i % (vectors.len() + 1))).collect();
            let f = featurize_sentence(&tokens, &lex, &t).unwrap();
            let mut rev = tokens.clone();
            rev.reverse();
            rev.rotate_left(tokens.len() / 2);
            let g = featurize_sentence(&rev, &lex, &t).unwrap();
            prop_assert_eq!(f, g);
            prop_assert!(f.sum_dist >= 0.0 && f.sum_dist <= 2.0 * f.length);
            prop_assert!((0.0..=2.0).contains(&f.mean_dist));
            prop_assert!((0.0..=2.0).contains(&f.range_dist));
            prop_assert!((f.sum_dist - f.mean_dist * f.length).abs() < 1e-9);
        }

        #[test]
        fn more_seeds_never_increase_distance(vectors in proptest::collection::vec(vec2(), 3..10)) {
            let rows: Vec<(String, Vec<f32>)> = vectors.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.to_vec())).collect();
            let t = EmbeddingTable::from_rows(2, rows).unwrap();
            let small = SeedLexicon::from_phrases(["w0"], &t).unwrap();
            let large = SeedLexicon::from_phrases(["w0", "w1"], &t).unwrap();
            for w in t.words() {
                prop_assert!(word_distance(w, &large, &t) <= word_distance(w, &small, &t));
            }
        }
    }
}
