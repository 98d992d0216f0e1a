use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, Scalar, Variant};
use crate::embeddings::{init_for_vocab, EmbeddingMatrix};
use crate::text::{encode, EncodedSentence, Vocabulary};
use crate::{rng, Error, Result};

/// Loss floor: probabilities are clamped to at least this value.
pub const PROB_FLOOR: f64 = 1e-12;

/// A named parameter tensor, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    /// Embedding tables: gradients and updates touch only used rows, and
    /// row 0 (PAD) never changes.
    pub embedding: bool,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayout {
    width: usize,
    kernel: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct BranchLayout {
    emb: usize,
    dim: usize,
    convs: Vec<ConvLayout>,
}

/// Where each tensor lives in `Model::params`.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    word: Option<BranchLayout>,
    pos: Option<BranchLayout>,
    hidden: Option<(usize, usize)>,
    out: (usize, usize),
    pooled_len: usize,
    dropout_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub tag_vocab: Vocabulary,
    pub params: Vec<Param<T>>,
    layout: Layout,
}

#[derive(Debug, Default, Clone)]
struct BranchCache<T> {
    max_pre: Vec<T>,
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    branches: Vec<BranchCache<T>>,
    pooled: Vec<T>,
    hidden_pre: Vec<T>,
    head_in: Vec<T>,
    logits: [T; 2],
}

/// Parameter gradients aligned with `Model::params`.
#[derive(Debug, Clone)]
pub struct Grads<T> {
    pub data: Vec<Vec<T>>,
    /// Rows with nonzero gradient, for embedding tensors.
    pub touched: Vec<Vec<usize>>,
    marks: Vec<Vec<bool>>,
    dims: Vec<usize>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        let data = model
            .params
            .iter()
            .map(|p| vec![T::zero(); p.data.len()])
            .collect();
        let marks = model
            .params
            .iter()
            .map(|p| {
                if p.embedding {
                    vec![false; p.shape[0]]
                } else {
                    Vec::new()
                }
            })
            .collect();
        let dims = model
            .params
            .iter()
            .map(|p| p.shape.last().copied().unwrap_or(1))
            .collect();
        Grads {
            data,
            touched: vec![Vec::new(); model.params.len()],
            marks,
            dims,
        }
    }

    pub fn clear(&mut self) {
        for i in 0..self.data.len() {
            if self.marks[i].is_empty() {
                self.data[i].iter_mut().for_each(|g| *g = T::zero());
            } else {
                let dim = self.dims[i];
                for &r in &self.touched[i] {
                    self.data[i][r * dim..(r + 1) * dim]
                        .iter_mut()
                        .for_each(|g| *g = T::zero());
                    self.marks[i][r] = false;
                }
                self.touched[i].clear();
            }
        }
    }

    fn touch(&mut self, tensor: usize, row: usize) {
        if !self.marks[tensor][row] {
            self.marks[tensor][row] = true;
            self.touched[tensor].push(row);
        }
    }
}

fn glorot<T: Scalar>(rng: &mut impl Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| T::of(rng.gen_range(-limit..=limit)))
        .collect()
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Two-class softmax computed stably in double precision.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn softmax_t<T: Scalar>(logits: [T; 2]) -> [T; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Mean of `-ln max(p_true, 1e-12)` over the batch.
pub fn loss(probabilities: &[[f64; 2]], labels: &[u8]) -> f64 {
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[usize::from(y)].max(PROB_FLOOR).ln())
        .sum();
    total / probabilities.len().max(1) as f64
}

impl Layout {
    fn build(
        config: &ModelConfig,
        vocab_len: usize,
        tags_len: usize,
    ) -> (Self, Vec<(String, Vec<usize>, bool)>) {
        let mut specs: Vec<(String, Vec<usize>, bool)> = Vec::new();
        let filters = config.filters_per_width;
        let branch =
            |prefix: &str, rows: usize, dim: usize, specs: &mut Vec<(String, Vec<usize>, bool)>| {
                let emb = specs.len();
                specs.push((format!("{prefix}.embedding"), vec![rows, dim], true));
                let convs = config
                    .filter_widths
                    .iter()
                    .map(|&w| {
                        let kernel = specs.len();
                        specs.push((
                            format!("{prefix}.conv{w}.kernel"),
                            vec![w, dim, filters],
                            false,
                        ));
                        specs.push((format!("{prefix}.conv{w}.bias"), vec![filters], false));
                        ConvLayout {
                            width: w,
                            kernel,
                            bias: kernel + 1,
                        }
                    })
                    .collect();
                BranchLayout { emb, dim, convs }
            };
        let word = config
            .variant
            .uses_words()
            .then(|| branch("word", vocab_len, config.word_dim, &mut specs));
        let pos = config
            .variant
            .uses_pos()
            .then(|| branch("pos", tags_len, config.pos_dim, &mut specs));
        let branch_len = config.filter_widths.len() * filters;
        let pooled_len = branch_len * (usize::from(word.is_some()) + usize::from(pos.is_some()));
        let (hidden, head_in) = if config.variant == Variant::Combined {
            let w = specs.len();
            specs.push((
                "merge.weight".into(),
                vec![config.merge_hidden, pooled_len],
                false,
            ));
            specs.push(("merge.bias".into(), vec![config.merge_hidden], false));
            (Some((w, w + 1)), config.merge_hidden)
        } else {
            (None, pooled_len)
        };
        let out = specs.len();
        specs.push(("output.weight".into(), vec![2, head_in], false));
        specs.push(("output.bias".into(), vec![2], false));
        let layout = Layout {
            word,
            pos,
            hidden,
            out: (out, out + 1),
            pooled_len,
            dropout_len: head_in,
        };
        (layout, specs)
    }
}

impl<T: Scalar> Model<T> {
    /// Fresh parameters. `word_init` supplies the word embedding rows
    /// (pretrained or random); without it they are drawn uniformly.
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        tag_vocab: Vocabulary,
        word_init: Option<EmbeddingMatrix>,
    ) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = Layout::build(&config, vocab.len(), tag_vocab.len());
        let mut rng = rng::substream(config.seed, rng::INIT);
        let word_matrix = match (config.variant.uses_words(), word_init) {
            (false, _) => None,
            (true, Some(m)) => {
                if m.rows != vocab.len() || m.dim != config.word_dim {
                    return Err(Error::invalid(format!(
                        "embedding matrix is {}x{}, model expects {}x{}",
                        m.rows,
                        m.dim,
                        vocab.len(),
                        config.word_dim
                    )));
                }
                Some(m)
            }
            (true, None) => Some(init_for_vocab(
                None,
                &vocab,
                config.word_dim,
                rng::derive_seed(config.seed, "word-embedding"),
            )?),
        };
        let pos_matrix = config
            .variant
            .uses_pos()
            .then(|| {
                init_for_vocab(
                    None,
                    &tag_vocab,
                    config.pos_dim,
                    rng::derive_seed(config.seed, "pos-embedding"),
                )
            })
            .transpose()?;

        let mut params = Vec::with_capacity(specs.len());
        for (name, shape, embedding) in specs {
            let n: usize = shape.iter().product();
            let (data, trainable) = if name == "word.embedding" {
                let m = word_matrix.as_ref().expect("word branch has a matrix");
                (
                    m.data.iter().map(|&x| T::of(f64::from(x))).collect(),
                    config.train_embeddings,
                )
            } else if name == "pos.embedding" {
                let m = pos_matrix.as_ref().expect("pos branch has a matrix");
                (m.data.iter().map(|&x| T::of(f64::from(x))).collect(), true)
            } else if name.ends_with("bias") {
                (vec![T::zero(); n], true)
            } else if shape.len() == 3 {
                (glorot(&mut rng, n, shape[0] * shape[1], shape[2]), true)
            } else {
                (glorot(&mut rng, n, shape[1], shape[0]), true)
            };
            params.push(Param {
                name,
                shape,
                data,
                embedding,
                trainable,
            });
        }
        Ok(Model {
            config,
            vocab,
            tag_vocab,
            params,
            layout,
        })
    }

    /// Reassembles a model from stored tensors, checking every shape.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocabulary,
        tag_vocab: Vocabulary,
        params: Vec<Param<T>>,
    ) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = Layout::build(&config, vocab.len(), tag_vocab.len());
        if specs.len() != params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                params.len()
            )));
        }
        for ((name, shape, _), p) in specs.iter().zip(&params) {
            if &p.name != name
                || &p.shape != shape
                || p.data.len() != shape.iter().product::<usize>()
            {
                return Err(Error::invalid(format!(
                    "tensor '{}' {:?} does not match expected '{name}' {shape:?}",
                    p.name, p.shape
                )));
            }
        }
        Ok(Model {
            config,
            vocab,
            tag_vocab,
            params,
            layout,
        })
    }

    /// The same model in another float type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            tag_vocab: self.tag_vocab.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|x| U::of(x.f64())).collect(),
                    embedding: p.embedding,
                    trainable: p.trainable,
                })
                .collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Length of the pooled feature vector (all branches).
    pub fn pooled_len(&self) -> usize {
        self.layout.pooled_len
    }

    /// Length of the vector dropout applies to.
    pub fn dropout_len(&self) -> usize {
        self.layout.dropout_len
    }

    pub fn encode(
        &self,
        tokens: &[String],
        pos_tags: Option<&[String]>,
    ) -> Result<EncodedSentence> {
        encode(
            tokens,
            pos_tags,
            &self.vocab,
            &self.tag_vocab,
            self.config.max_len,
            self.config.max_width(),
        )
    }

    /// Inverted dropout mask: each unit is 0 with probability `rate`,
    /// otherwise `1 / (1 - rate)`.
    pub fn sample_mask(&self, rng: &mut impl Rng) -> Vec<T> {
        let rate = self.config.dropout;
        let keep = T::of(1.0 / (1.0 - rate));
        (0..self.layout.dropout_len)
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect()
    }

    fn check_input(&self, ex: &EncodedSentence) -> Result<()> {
        if self.config.variant.uses_pos() && ex.pos_indices.is_none() {
            return Err(Error::invalid(format!(
                "{} needs POS tags but the sentence has none",
                self.config.variant.name()
            )));
        }
        if ex.true_length < self.config.max_width() || ex.true_length > ex.indices.len() {
            return Err(Error::invalid(format!(
                "sentence true_length {} is incompatible with filter width {}",
                ex.true_length,
                self.config.max_width()
            )));
        }
        Ok(())
    }

    /// Convolution and max-over-time pooling of one branch, appended to
    /// `out`. Only windows inside `true_length` are considered.
    fn branch_forward(
        &self,
        b: &BranchLayout,
        idx: &[usize],
        true_length: usize,
        out: &mut Vec<T>,
        cache: &mut BranchCache<T>,
    ) {
        let emb = &self.params[b.emb].data;
        let dim = b.dim;
        let filters = self.config.filters_per_width;
        let mut acc = vec![T::zero(); filters];
        for conv in &b.convs {
            let kernel = &self.params[conv.kernel].data;
            let bias = &self.params[conv.bias].data;
            let mut best = vec![T::neg_infinity(); filters];
            let mut arg = vec![0usize; filters];
            for t in 0..=true_length - conv.width {
                acc.copy_from_slice(bias);
                for o in 0..conv.width {
                    let row = idx[t + o];
                    if row == Vocabulary::PAD {
                        continue;
                    }
                    let e = &emb[row * dim..(row + 1) * dim];
                    let k = &kernel[o * dim * filters..(o + 1) * dim * filters];
                    for (d, &ed) in e.iter().enumerate() {
                        for (a, &kv) in acc.iter_mut().zip(&k[d * filters..(d + 1) * filters]) {
                            *a += ed * kv;
                        }
                    }
                }
                for j in 0..filters {
                    if acc[j] > best[j] {
                        best[j] = acc[j];
                        arg[j] = t;
                    }
                }
            }
            out.extend(best.iter().map(|&v| relu(v)));
            cache.max_pre.extend_from_slice(&best);
            cache.argmax.extend_from_slice(&arg);
        }
    }

    fn dense(&self, (w, b): (usize, usize), input: &[T]) -> Vec<T> {
        let w = &self.params[w].data;
        let b = &self.params[b].data;
        let n_in = input.len();
        b.iter()
            .enumerate()
            .map(|(k, &bk)| {
                let row = &w[k * n_in..(k + 1) * n_in];
                let mut s = bk;
                for (&wv, &x) in row.iter().zip(input) {
                    s += wv * x;
                }
                s
            })
            .collect()
    }

    fn forward_cached(&self, ex: &EncodedSentence, mask: Option<&[T]>) -> Cache<T> {
        let mut pooled = Vec::with_capacity(self.layout.pooled_len);
        let mut branches = Vec::new();
        for (b, idx) in [
            (&self.layout.word, Some(&ex.indices)),
            (&self.layout.pos, ex.pos_indices.as_ref()),
        ] {
            if let Some(b) = b {
                let mut cache = BranchCache::default();
                self.branch_forward(
                    b,
                    idx.expect("checked input"),
                    ex.true_length,
                    &mut pooled,
                    &mut cache,
                );
                branches.push(cache);
            }
        }
        let (hidden_pre, mut head_in) = match self.layout.hidden {
            Some(h) => {
                let pre = self.dense(h, &pooled);
                let act = pre.iter().map(|&z| relu(z)).collect();
                (pre, act)
            }
            None => (Vec::new(), pooled.clone()),
        };
        if let Some(mask) = mask {
            head_in.iter_mut().zip(mask).for_each(|(h, &m)| *h = *h * m);
        }
        let l = self.dense(self.layout.out, &head_in);
        Cache {
            branches,
            pooled,
            hidden_pre,
            head_in,
            logits: [l[0], l[1]],
        }
    }

    /// Logits of one sentence; `mask` applies training-mode dropout.
    pub fn logits(&self, ex: &EncodedSentence, mask: Option<&[T]>) -> Result<[T; 2]> {
        self.check_input(ex)?;
        Ok(self.forward_cached(ex, mask).logits)
    }

    /// Eval-mode class probabilities.
    pub fn forward(&self, batch: &[EncodedSentence]) -> Result<Vec<[f64; 2]>> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        batch
            .iter()
            .map(|ex| {
                self.logits(ex, None)
                    .map(|l| softmax([l[0].f64(), l[1].f64()]))
            })
            .collect()
    }

    /// Eval-mode probabilities, computed in parallel over sentences.
    pub fn predict_batch(&self, batch: &[EncodedSentence]) -> Result<Vec<[f64; 2]>> {
        use rayon::prelude::*;
        batch
            .par_iter()
            .map(|ex| {
                self.logits(ex, None)
                    .map(|l| softmax([l[0].f64(), l[1].f64()]))
            })
            .collect()
    }

    fn branch_backward(
        &self,
        b: &BranchLayout,
        idx: &[usize],
        cache: &BranchCache<T>,
        dpooled: &[T],
        grads: &mut Grads<T>,
    ) {
        let emb = &self.params[b.emb].data;
        let emb_trainable = self.params[b.emb].trainable;
        let dim = b.dim;
        let filters = self.config.filters_per_width;
        for (ci, conv) in b.convs.iter().enumerate() {
            let kernel = &self.params[conv.kernel].data;
            for j in 0..filters {
                let u = ci * filters + j;
                let g = dpooled[u];
                if g == T::zero() || cache.max_pre[u] <= T::zero() {
                    continue;
                }
                let t = cache.argmax[u];
                grads.data[conv.bias][j] += g;
                for o in 0..conv.width {
                    let row = idx[t + o];
                    if row == Vocabulary::PAD {
                        continue;
                    }
                    let e = &emb[row * dim..(row + 1) * dim];
                    for (d, &ed) in e.iter().enumerate() {
                        grads.data[conv.kernel][(o * dim + d) * filters + j] += g * ed;
                    }
                    if emb_trainable {
                        grads.touch(b.emb, row);
                        let de = &mut grads.data[b.emb][row * dim..(row + 1) * dim];
                        for (d, dv) in de.iter_mut().enumerate() {
                            *dv += g * kernel[(o * dim + d) * filters + j];
                        }
                    }
                }
            }
        }
    }

    /// Accumulates `scale * d loss / d params` for one sentence into
    /// `grads` and returns the (clamped) loss and predicted class.
    fn backward_one(
        &self,
        ex: &EncodedSentence,
        label: u8,
        mask: Option<&[T]>,
        scale: T,
        grads: &mut Grads<T>,
    ) -> (T, u8) {
        let cache = self.forward_cached(ex, mask);
        let p = softmax_t(cache.logits);
        let y = usize::from(label);
        let floor = T::of(PROB_FLOOR);
        let loss = -p[y].max(floor).ln();
        let predicted = u8::from(p[1] > p[0]);
        if p[y] < floor {
            // The clamp is flat here.
            return (loss, predicted);
        }
        let dlogits = [
            (p[0] - if y == 0 { T::one() } else { T::zero() }) * scale,
            (p[1] - if y == 1 { T::one() } else { T::zero() }) * scale,
        ];

        let (ow, ob) = self.layout.out;
        let n_head = cache.head_in.len();
        let mut dhead = vec![T::zero(); n_head];
        for k in 0..2 {
            grads.data[ob][k] += dlogits[k];
            let w = &self.params[ow].data[k * n_head..(k + 1) * n_head];
            let gw = &mut grads.data[ow][k * n_head..(k + 1) * n_head];
            for j in 0..n_head {
                gw[j] += dlogits[k] * cache.head_in[j];
                dhead[j] += dlogits[k] * w[j];
            }
        }
        if let Some(mask) = mask {
            dhead.iter_mut().zip(mask).for_each(|(d, &m)| *d = *d * m);
        }

        let dpooled = match self.layout.hidden {
            Some((hw, hb)) => {
                let n_in = cache.pooled.len();
                let mut dpooled = vec![T::zero(); n_in];
                for (k, &dh) in dhead.iter().enumerate() {
                    if cache.hidden_pre[k] <= T::zero() || dh == T::zero() {
                        continue;
                    }
                    grads.data[hb][k] += dh;
                    let w = &self.params[hw].data[k * n_in..(k + 1) * n_in];
                    let gw = &mut grads.data[hw][k * n_in..(k + 1) * n_in];
                    for j in 0..n_in {
                        gw[j] += dh * cache.pooled[j];
                        dpooled[j] += dh * w[j];
                    }
                }
                dpooled
            }
            None => dhead,
        };

        let branch_len = self.config.filter_widths.len() * self.config.filters_per_width;
        let mut offset = 0;
        let mut caches = cache.branches.iter();
        for (b, idx) in [
            (&self.layout.word, Some(&ex.indices)),
            (&self.layout.pos, ex.pos_indices.as_ref()),
        ] {
            if let Some(b) = b {
                let bc = caches.next().expect("one cache per branch");
                self.branch_backward(
                    b,
                    idx.expect("checked input"),
                    bc,
                    &dpooled[offset..offset + branch_len],
                    grads,
                );
                offset += branch_len;
            }
        }
        (loss, predicted)
    }

    /// Mean-loss gradients over a batch. `masks`, when given, holds one
    /// dropout mask per sentence. Returns the mean loss and the number of
    /// correct predictions.
    pub fn gradients(
        &self,
        batch: &[&EncodedSentence],
        labels: &[u8],
        masks: Option<&[Vec<T>]>,
        grads: &mut Grads<T>,
    ) -> Result<(T, usize)> {
        if batch.is_empty() || batch.len() != labels.len() {
            return Err(Error::invalid(
                "batch and labels must be non-empty and aligned",
            ));
        }
        grads.clear();
        let scale = T::one() / T::of(batch.len() as f64);
        let mut total = T::zero();
        let mut correct = 0;
        for (i, (ex, &y)) in batch.iter().zip(labels).enumerate() {
            self.check_input(ex)?;
            let (l, pred) = self.backward_one(ex, y, masks.map(|m| m[i].as_slice()), scale, grads);
            total += l;
            correct += usize::from(pred == y);
        }
        Ok((total * scale, correct))
    }

    /// Mean clamped cross-entropy over a batch.
    pub fn batch_loss(
        &self,
        batch: &[&EncodedSentence],
        labels: &[u8],
        masks: Option<&[Vec<T>]>,
    ) -> Result<T> {
        let mut total = T::zero();
        for (i, (ex, &y)) in batch.iter().zip(labels).enumerate() {
            self.check_input(ex)?;
            let l = self
                .forward_cached(ex, masks.map(|m| m[i].as_slice()))
                .logits;
            let p = softmax_t(l);
            total += -p[usize::from(y)].max(T::of(PROB_FLOOR)).ln();
        }
        Ok(total / T::of(batch.len().max(1) as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Variant;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn small(variant: Variant) -> Model<f64> {
        let config = ModelConfig {
            variant,
            word_dim: 6,
            pos_dim: 4,
            filter_widths: vec![2, 3],
            filters_per_width: 5,
            merge_hidden: 7,
            max_len: 12,
            ..ModelConfig::default()
        };
        let vocab = Vocabulary::from_words(["a", "b", "c", "d"].map(String::from));
        Model::new(config, vocab, Vocabulary::tagset(), None).unwrap()
    }

    fn sentence(m: &Model<f64>, words: &[&str]) -> EncodedSentence {
        let tags: Vec<String> = words.iter().map(|_| "NOUN".to_string()).collect();
        m.encode(&toks(words), Some(&tags)).unwrap()
    }

    #[test]
    fn shapes_follow_config() {
        let m = small(Variant::Combined);
        let names: Vec<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "word.embedding",
                "word.conv2.kernel",
                "word.conv2.bias",
                "word.conv3.kernel",
                "word.conv3.bias",
                "pos.embedding",
                "pos.conv2.kernel",
                "pos.conv2.bias",
                "pos.conv3.kernel",
                "pos.conv3.bias",
                "merge.weight",
                "merge.bias",
                "output.weight",
                "output.bias",
            ]
        );
        assert_eq!(m.pooled_len(), 20);
        assert_eq!(m.dropout_len(), 7);
        assert_eq!(m.param("merge.weight").unwrap().shape, vec![7, 20]);
        assert!(m.param("word.embedding").unwrap().data[..6]
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn zero_kernels_pool_to_zero() {
        let mut m = small(Variant::WordCnn);
        for p in &mut m.params {
            if p.name.contains("conv") {
                p.data.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let ex = sentence(&m, &["a", "b", "c"]);
        let c = m.forward_cached(&ex, None);
        assert!(c.pooled.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_sequence_pools_to_window_value() {
        let m = small(Variant::WordCnn);
        let ex = sentence(&m, &["a", "a", "a", "a", "a", "a"]);
        let c = m.forward_cached(&ex, None);
        // Every window sees the same input, so the pooled value equals the
        // activation of the first window.
        let short = sentence(&m, &["a", "a", "a"]);
        let c3 = m.forward_cached(&short, None);
        assert_eq!(c.pooled, c3.pooled);
    }

    #[test]
    fn feature_map_length() {
        let m = small(Variant::WordCnn);
        let ex = sentence(&m, &["a", "b", "c", "d", "a", "b", "c", "d", "a", "b"]);
        let c = m.forward_cached(&ex, None);
        // Width 3 over 10 tokens has 8 windows: argmax positions stay below 8.
        assert!(c.branches[0].argmax[5..].iter().all(|&t| t < 8));
        assert_eq!(ex.true_length - 3 + 1, 8);
    }

    #[test]
    fn probabilities_are_normalized() {
        assert_eq!(softmax([0.0, 0.0]), [0.5, 0.5]);
        for v in [Variant::WordCnn, Variant::PosCnn, Variant::Combined] {
            let m = small(v);
            let batch = vec![
                sentence(&m, &["a", "b"]),
                sentence(&m, &["d", "c", "b", "a", "zz"]),
            ];
            for p in m.forward(&batch).unwrap() {
                assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
                assert!(p[0] > 0.0 && p[1] > 0.0);
            }
            assert_eq!(m.forward(&batch).unwrap(), m.forward(&batch).unwrap());
            assert_eq!(m.forward(&batch).unwrap(), m.predict_batch(&batch).unwrap());
        }
    }

    #[test]
    fn untagged_input_rejected_by_pos_variants() {
        let m = small(Variant::PosCnn);
        let ex = m.encode(&toks(&["a", "b"]), None).unwrap();
        assert!(m.forward(&[ex]).is_err());
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[[0.0, 1.0]], &[1]), 0.0);
        assert!((loss(&[[0.5, 0.5], [0.5, 0.5]], &[0, 1]) - std::f64::consts::LN_2).abs() < 1e-15);
        let clamped = loss(&[[1.0, 0.0]], &[1]);
        assert!(clamped.is_finite());
        assert!((clamped - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn from_parts_checks_shapes() {
        let m = small(Variant::PosCnn);
        let ok = Model::from_parts(
            m.config.clone(),
            m.vocab.clone(),
            m.tag_vocab.clone(),
            m.params.clone(),
        )
        .unwrap();
        assert_eq!(ok, m);
        let mut bad = m.params.clone();
        bad[0].shape = vec![1, 1];
        assert!(
            Model::from_parts(m.config.clone(), m.vocab.clone(), m.tag_vocab.clone(), bad).is_err()
        );
    }
}
