//! Synthetic aggression-style corpus with matching embeddings and seed
//! lexicon. Aggressive and neutral tokens live in two well separated
//! embedding clusters, and POS tag sequences follow class-specific Markov
//! chains, so every classifier has something to learn.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Example, LabeledDataset};
use crate::embeddings::EmbeddingTable;
use crate::text::{ADJ, ADP, ADV, CONJ, DET, NOUN, PRON, PRT, PUNCT, VERB};
use crate::{rng, Error, Result};

pub const VOCAB_HALF: usize = 200;
pub const LEXICON_SIZE: usize = 10;
pub const DIM: usize = 50;
pub const MIN_LEN: usize = 5;
pub const MAX_LEN: usize = 20;
/// Share of sentences whose tags follow their own class's chain; the rest
/// use the other class's, so tags alone cannot separate every sentence.
pub const CHAIN_PURITY: f64 = 0.85;

#[derive(Debug, Clone)]
pub struct Synth {
    pub dataset: LabeledDataset,
    pub table: EmbeddingTable,
    /// Lexicon file content, one seed word per line.
    pub lexicon: String,
}

pub fn aggressive_word(i: usize) -> String {
    format!("grr{i:03}")
}

pub fn neutral_word(i: usize) -> String {
    format!("calm{i:03}")
}

type Chain = (
    &'static [(&'static str, f64)],
    &'static [(&'static str, &'static [(&'static str, f64)])],
);

// Imperatives and pronoun-initial patterns.
const AGGRESSIVE_TAGS: Chain = (
    &[(PRON, 0.45), (VERB, 0.45), (ADJ, 0.1)],
    &[
        (VERB, &[(PRON, 0.5), (PRT, 0.2), (NOUN, 0.2), (ADV, 0.1)]),
        (PRON, &[(VERB, 0.5), (NOUN, 0.2), (ADJ, 0.2), (PUNCT, 0.1)]),
        (PRT, &[(VERB, 0.5), (PRON, 0.3), (PUNCT, 0.2)]),
        (NOUN, &[(VERB, 0.4), (PUNCT, 0.3), (PRON, 0.3)]),
        (ADJ, &[(NOUN, 0.6), (PRON, 0.4)]),
        (ADV, &[(VERB, 0.6), (PRON, 0.4)]),
        (PUNCT, &[(PRON, 0.5), (VERB, 0.5)]),
    ],
);

// Determiner-led descriptive phrases.
const NEUTRAL_TAGS: Chain = (
    &[(DET, 0.6), (NOUN, 0.2), (ADJ, 0.2)],
    &[
        (DET, &[(ADJ, 0.4), (NOUN, 0.6)]),
        (ADJ, &[(NOUN, 0.8), (CONJ, 0.2)]),
        (NOUN, &[(ADP, 0.4), (VERB, 0.3), (CONJ, 0.2), (PUNCT, 0.1)]),
        (ADP, &[(DET, 0.7), (NOUN, 0.3)]),
        (VERB, &[(DET, 0.5), (ADP, 0.3), (ADV, 0.2)]),
        (CONJ, &[(DET, 0.5), (ADJ, 0.3), (NOUN, 0.2)]),
        (ADV, &[(ADJ, 0.5), (VERB, 0.5)]),
        (PUNCT, &[(DET, 1.0)]),
    ],
);

fn draw(rng: &mut impl Rng, options: &[(&'static str, f64)]) -> &'static str {
    let mut u = rng.gen::<f64>() * options.iter().map(|o| o.1).sum::<f64>();
    for &(tag, p) in options {
        if u < p {
            return tag;
        }
        u -= p;
    }
    options[options.len() - 1].0
}

fn tag_sequence(rng: &mut impl Rng, chain: Chain, len: usize) -> Vec<String> {
    let mut tags = vec![draw(rng, chain.0)];
    while tags.len() < len {
        let prev = tags[tags.len() - 1];
        let next = chain
            .1
            .iter()
            .find(|(t, _)| *t == prev)
            .map_or(chain.0, |(_, opts)| opts);
        tags.push(draw(rng, next));
    }
    tags.into_iter().map(String::from).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `n` sentences (labels alternate 0, 1), a 400-word embedding table and a
/// 10-word aggressive seed lexicon.
pub fn synth_aggression(n: usize, seed: u64) -> Result<Synth> {
    if n < 20 {
        return Err(Error::invalid(format!(
            "synthetic corpus needs at least 20 sentences, got {n}"
        )));
    }
    let mut rng = rng::substream(seed, rng::SYNTH);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    // Opposite cluster centers; per-word noise of norm about 0.5.
    let center = unit((0..DIM).map(|_| normal.sample(&mut rng)).collect());
    let noise = 0.5 / (DIM as f64).sqrt();
    let mut table = EmbeddingTable::new(DIM)?;
    for (sign, name) in [
        (1.0, aggressive_word as fn(usize) -> String),
        (-1.0, neutral_word),
    ] {
        for i in 0..VOCAB_HALF {
            let v = unit(
                center
                    .iter()
                    .map(|c| sign * c + noise * normal.sample(&mut rng))
                    .collect(),
            );
            table.insert(name(i), &v.iter().map(|&x| x as f32).collect::<Vec<_>>())?;
        }
    }

    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let len = rng.gen_range(MIN_LEN..=MAX_LEN);
        let n_aggressive = if label == 1 {
            rng.gen_range((len * 6).div_ceil(10)..=len)
        } else {
            rng.gen_range(0..=len / 10)
        };
        let mut aggressive = vec![true; n_aggressive];
        aggressive.resize(len, false);
        aggressive.shuffle(&mut rng);
        let tokens: Vec<String> = aggressive
            .iter()
            .map(|&a| {
                let k = rng.gen_range(0..VOCAB_HALF);
                if a {
                    aggressive_word(k)
                } else {
                    neutral_word(k)
                }
            })
            .collect();
        let own = rng.gen::<f64>() < CHAIN_PURITY;
        let chain = if (label == 1) == own {
            AGGRESSIVE_TAGS
        } else {
            NEUTRAL_TAGS
        };
        let tags = tag_sequence(&mut rng, chain, len);
        examples.push(Example::from_tokens(tokens, Some(tags), label));
    }
    let lexicon = (0..LEXICON_SIZE)
        .map(|i| aggressive_word(i) + "\n")
        .collect();
    Ok(Synth {
        dataset: LabeledDataset::new("synth", examples),
        table,
        lexicon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine_distance;
    use crate::features::{featurize_dataset, SeedLexicon};

    #[test]
    fn construction_contract() {
        let s = synth_aggression(101, 4).unwrap();
        assert_eq!(s.dataset.len(), 101);
        let [c0, c1] = s.dataset.class_counts();
        assert!(c0.abs_diff(c1) <= 1);
        assert_eq!(s.table.len(), 2 * VOCAB_HALF);
        assert_eq!(s.lexicon.lines().count(), LEXICON_SIZE);
        for e in &s.dataset.examples {
            let len = e.tokens.len();
            assert!((MIN_LEN..=MAX_LEN).contains(&len));
            assert_eq!(e.pos_tags.as_ref().unwrap().len(), len);
            let agg = e.tokens.iter().filter(|t| t.starts_with("grr")).count() as f64 / len as f64;
            if e.label == 1 {
                assert!(agg >= 0.6);
            } else {
                assert!(agg <= 0.1);
            }
        }
        assert!(synth_aggression(19, 1).is_err());
    }

    #[test]
    fn clusters_are_far_apart() {
        let s = synth_aggression(20, 2).unwrap();
        let mut min_cross = f64::INFINITY;
        for i in 0..VOCAB_HALF {
            for j in 0..VOCAB_HALF {
                let d = cosine_distance(
                    s.table.get(&aggressive_word(i)).unwrap(),
                    s.table.get(&neutral_word(j)).unwrap(),
                );
                min_cross = min_cross.min(d);
            }
        }
        assert!(min_cross >= 1.0, "{min_cross}");
    }

    #[test]
    fn aggressive_sentences_sit_closer_to_the_lexicon() {
        let s = synth_aggression(200, 3).unwrap();
        let lex = SeedLexicon::from_phrases(s.lexicon.lines(), &s.table).unwrap();
        let (x, y) = featurize_dataset(&s.dataset, &lex, &s.table).unwrap();
        let mean = |c: u8| {
            let rows: Vec<f64> = x
                .iter()
                .zip(&y)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r[1])
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        assert!(mean(1) + 0.5 < mean(0), "{} vs {}", mean(1), mean(0));
    }

    #[test]
    fn same_seed_same_data() {
        let a = synth_aggression(50, 9).unwrap();
        let b = synth_aggression(50, 9).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.table, b.table);
        assert_ne!(a.dataset, synth_aggression(50, 10).unwrap().dataset);
    }
}
