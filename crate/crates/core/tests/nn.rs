use aggro::corpus::{Example, LabeledDataset};
use aggro::nn::{
    grad_check, train_model, Adam, BatchObjective, GradTarget, Grads, Model, ModelConfig, Variant,
};
use aggro::rng;
use aggro::text::{EncodedSentence, Vocabulary};
use rand::Rng;

const WORDS: [&str; 8] = [
    "you", "idiot", "shut", "up", "nice", "day", "thanks", "friend",
];
const TAGS: [&str; 5] = ["PRON", "NOUN", "VERB", "PRT", "ADJ"];

fn config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        word_dim: 5,
        pos_dim: 4,
        filter_widths: vec![2, 3],
        filters_per_width: 4,
        merge_hidden: 6,
        max_len: 10,
        ..ModelConfig::default()
    }
}

fn model(variant: Variant, seed: u64) -> Model<f64> {
    let vocab = Vocabulary::from_words(WORDS.map(String::from));
    let c = ModelConfig {
        seed,
        ..config(variant)
    };
    Model::new(c, vocab, Vocabulary::tagset(), None).unwrap()
}

fn random_sentences<T: aggro::nn::Scalar>(
    m: &Model<T>,
    n: usize,
    seed: u64,
) -> (Vec<EncodedSentence>, Vec<u8>) {
    let mut r = rng::indexed(seed, 7);
    let mut out = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let len = r.gen_range(1..=12);
        let toks: Vec<String> = (0..len)
            .map(|_| WORDS[r.gen_range(0..WORDS.len())].to_string())
            .collect();
        let tags: Vec<String> = (0..len)
            .map(|_| TAGS[r.gen_range(0..TAGS.len())].to_string())
            .collect();
        out.push(m.encode(&toks, Some(&tags)).unwrap());
        labels.push((i % 2) as u8);
    }
    (out, labels)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for variant in [Variant::WordCnn, Variant::PosCnn, Variant::Combined] {
        let m = model(variant, 3);
        let (batch, labels) = random_sentences(&m, 6, 11);
        let mut r = rng::substream(5, rng::DROPOUT);
        let masks: Vec<Vec<f64>> = batch.iter().map(|_| m.sample_mask(&mut r)).collect();
        let mut obj = BatchObjective::new(m, batch.iter().collect(), labels, Some(masks)).unwrap();
        let report = grad_check(&mut obj, 1e-5, 200, 1);
        for t in &report.tensors {
            assert!(t.checked > 0, "{variant:?} {} had nothing to check", t.name);
        }
        assert!(report.max_relative_error < 1e-4, "{variant:?}: {report:#?}");
    }
}

/// Softmax regression on fixed inputs: no kinks, so central differences
/// should agree very closely.
struct Linear {
    w: Vec<f64>,
    x: Vec<[f64; 3]>,
    y: Vec<usize>,
}

impl Linear {
    fn probs(&self, x: &[f64; 3]) -> [f64; 2] {
        let z: Vec<f64> = (0..2)
            .map(|k| (0..3).map(|d| self.w[k * 3 + d] * x[d]).sum())
            .collect();
        aggro::nn::softmax([z[0], z[1]])
    }
}

impl GradTarget for Linear {
    fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        vec![("w".into(), (0..6).collect())]
    }
    fn get(&self, _: usize, i: usize) -> f64 {
        self.w[i]
    }
    fn set(&mut self, _: usize, i: usize, v: f64) {
        self.w[i] = v;
    }
    fn loss(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, &y)| -self.probs(x)[y].ln())
            .sum::<f64>()
            / self.x.len() as f64
    }
    fn gradient(&self) -> Vec<Vec<f64>> {
        let mut g = vec![0.0; 6];
        for (x, &y) in self.x.iter().zip(&self.y) {
            let p = self.probs(x);
            for k in 0..2 {
                let d = p[k] - f64::from(u8::from(k == y));
                for j in 0..3 {
                    g[k * 3 + j] += d * x[j] / self.x.len() as f64;
                }
            }
        }
        vec![g]
    }
}

#[test]
fn linear_toy_gradient_is_tight() {
    let mut toy = Linear {
        w: vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6],
        x: vec![[1.0, 2.0, -1.0], [0.5, -0.3, 0.8], [-1.2, 0.4, 0.1]],
        y: vec![0, 1, 1],
    };
    let report = grad_check(&mut toy, 1e-5, 200, 1);
    assert!(report.max_relative_error < 1e-7, "{report:?}");
}

#[test]
fn padding_length_does_not_change_output() {
    for variant in [Variant::WordCnn, Variant::PosCnn, Variant::Combined] {
        let short = model(variant, 2);
        let mut long_cfg = short.config.clone();
        long_cfg.max_len = 40;
        let long = Model::from_parts(
            long_cfg,
            short.vocab.clone(),
            short.tag_vocab.clone(),
            short.params.clone(),
        )
        .unwrap();
        let toks: Vec<String> = ["you", "idiot", "shut", "up"].map(String::from).to_vec();
        let tags: Vec<String> = ["PRON", "NOUN", "VERB", "PRT"].map(String::from).to_vec();
        let a = short.encode(&toks, Some(&tags)).unwrap();
        let b = long.encode(&toks, Some(&tags)).unwrap();
        assert_eq!(a.indices.len(), 10);
        assert_eq!(b.indices.len(), 40);
        assert_eq!(short.forward(&[a]).unwrap(), long.forward(&[b]).unwrap());
    }
}

#[test]
fn dropout_is_unbiased_in_expectation() {
    let m = model(Variant::WordCnn, 4);
    let (batch, _) = random_sentences(&m, 1, 3);
    let eval = m.logits(&batch[0], None).unwrap();
    let mut r = rng::substream(9, rng::DROPOUT);
    let n = 20_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let mask = m.sample_mask(&mut r);
            m.logits(&batch[0], Some(&mask)).unwrap()[1]
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(
        (mean - eval[1]).abs() <= 3.0 * se,
        "mean {mean} eval {} se {se}",
        eval[1]
    );
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let m0 = model(Variant::Combined, 1);
    let mut m = m0.clone();
    let (batch, labels) = random_sentences(&m, 8, 2);
    let refs: Vec<&EncodedSentence> = batch.iter().collect();
    let mut grads = Grads::zeros_like(&m);
    let mut adam = Adam::new(&m, 0.0);
    for _ in 0..3 {
        m.backward_and_step(&refs, &labels, None, &mut grads, &mut adam)
            .unwrap();
    }
    assert_eq!(m, m0);
}

#[test]
fn one_small_step_lowers_the_loss() {
    for variant in [Variant::WordCnn, Variant::PosCnn, Variant::Combined] {
        let mut m = model(variant, 6);
        let (batch, labels) = random_sentences(&m, 10, 4);
        let refs: Vec<&EncodedSentence> = batch.iter().collect();
        let before = m.batch_loss(&refs, &labels, None).unwrap();
        let mut grads = Grads::zeros_like(&m);
        let mut adam = Adam::new(&m, 1e-3);
        m.backward_and_step(&refs, &labels, None, &mut grads, &mut adam)
            .unwrap();
        let after = m.batch_loss(&refs, &labels, None).unwrap();
        assert!(after < before, "{variant:?}: {before} -> {after}");
    }
}

#[test]
fn pad_row_never_moves() {
    let mut m = model(Variant::Combined, 8);
    let (batch, labels) = random_sentences(&m, 10, 5);
    let refs: Vec<&EncodedSentence> = batch.iter().collect();
    let mut grads = Grads::zeros_like(&m);
    let mut adam = Adam::new(&m, 0.1);
    for _ in 0..5 {
        m.backward_and_step(&refs, &labels, None, &mut grads, &mut adam)
            .unwrap();
    }
    for name in ["word.embedding", "pos.embedding"] {
        let p = m.param(name).unwrap();
        assert!(p.data[..p.shape[1]].iter().all(|&x| x == 0.0), "{name}");
    }
}

fn toy_dataset(n: usize, tagged: bool) -> LabeledDataset {
    let examples = (0..n)
        .map(|i| {
            let words: &[&str] = if i % 2 == 1 {
                &["you", "idiot", "shut", "up"]
            } else {
                &["nice", "day", "thanks", "friend"]
            };
            let tags: &[&str] = if i % 2 == 1 {
                &["PRON", "NOUN", "VERB", "PRT"]
            } else {
                &["ADJ", "NOUN", "NOUN", "NOUN"]
            };
            let toks = words
                .iter()
                .cycle()
                .skip(i % 4)
                .take(3 + i % 5)
                .map(|s| s.to_string())
                .collect::<Vec<_>>();
            let tg = tags
                .iter()
                .cycle()
                .skip(i % 4)
                .take(3 + i % 5)
                .map(|s| s.to_string())
                .collect::<Vec<_>>();
            Example::from_tokens(toks, tagged.then_some(tg), (i % 2) as u8)
        })
        .collect();
    LabeledDataset::new("toy", examples)
}

#[test]
fn training_learns_a_separable_toy_task_and_replays_exactly() {
    let train = toy_dataset(80, true);
    let eval = toy_dataset(20, true);
    for variant in [Variant::WordCnn, Variant::PosCnn, Variant::Combined] {
        let cfg = ModelConfig {
            epochs: 5,
            batch_size: 10,
            learning_rate: 1e-2,
            ..config(variant)
        };
        let (m1, r1) = train_model(&cfg, &train, &eval, None).unwrap();
        let (m2, r2) = train_model(&cfg, &train, &eval, None).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        assert_eq!(r1.epochs.len(), 5);
        assert!(r1.best_eval_accuracy >= 0.95, "{variant:?}: {r1:?}");
        assert_eq!(
            r1.epochs[r1.best_epoch - 1].eval_accuracy,
            r1.best_eval_accuracy
        );
    }
}

#[test]
fn static_embeddings_stay_fixed() {
    let train = toy_dataset(40, false);
    let cfg = ModelConfig {
        train_embeddings: false,
        epochs: 2,
        ..config(Variant::WordCnn)
    };
    let (m, _) = train_model(&cfg, &train, &train, None).unwrap();
    let fresh =
        Model::<f32>::new(cfg.clone(), m.vocab.clone(), Vocabulary::tagset(), None).unwrap();
    assert_eq!(m.param("word.embedding"), fresh.param("word.embedding"));
    assert_ne!(m.param("output.weight"), fresh.param("output.weight"));
}

#[test]
fn pos_variant_requires_tags() {
    let train = toy_dataset(10, false);
    let err = train_model(&config(Variant::PosCnn), &train, &train, None).unwrap_err();
    assert!(err.to_string().contains("POS tags"), "{err}");
}
