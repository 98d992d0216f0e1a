//! Sentence CNNs: convolution with max-over-time pooling over word
//! embeddings, over POS-tag embeddings, or over both with a merged head.
//!
//! Forward and backward passes are written out by hand and generic over
//! the float type: training runs in `f32`, gradient checking in `f64`.

mod gradcheck;
mod model;
mod optim;
mod train;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use gradcheck::{grad_check, BatchObjective, GradCheckReport, GradTarget, TensorCheck};
pub use model::{loss, softmax, Grads, Model, Param};
pub use optim::Adam;
pub use train::{encode_dataset, train_model, EpochStats, TrainReport};

/// Float type the networks are generic over.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + Default
    + Send
    + Sync
    + std::fmt::Debug
    + std::iter::Sum
    + std::ops::AddAssign
    + Serialize
    + for<'de> Deserialize<'de>
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Fine-tuned word embeddings.
    WordCnn,
    /// Randomly initialized POS-tag embeddings.
    PosCnn,
    /// Both branches, merged through a hidden layer.
    Combined,
}

impl Variant {
    pub fn uses_words(self) -> bool {
        matches!(self, Variant::WordCnn | Variant::Combined)
    }

    pub fn uses_pos(self) -> bool {
        matches!(self, Variant::PosCnn | Variant::Combined)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::WordCnn => "word_cnn",
            Variant::PosCnn => "pos_cnn",
            Variant::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word_cnn" => Ok(Variant::WordCnn),
            "pos_cnn" => Ok(Variant::PosCnn),
            "combined" => Ok(Variant::Combined),
            other => Err(Error::Config(format!(
                "unknown model variant '{other}' (expected word_cnn, pos_cnn or combined)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Hidden units of the merge layer (combined variant only).
    pub merge_hidden: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fine-tune word embeddings ("non-static"). POS embeddings always train.
    pub train_embeddings: bool,
    pub min_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::WordCnn,
            word_dim: 100,
            pos_dim: 20,
            filter_widths: vec![3, 5],
            filters_per_width: 50,
            merge_hidden: 64,
            dropout: 0.5,
            max_len: crate::text::DEFAULT_MAX_LEN,
            learning_rate: 1e-3,
            batch_size: 50,
            epochs: 10,
            seed: 1,
            train_embeddings: true,
            min_count: 1,
        }
    }
}

impl ModelConfig {
    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return fail("cnn.filter_widths must be a non-empty list of positive widths".into());
        }
        if self.max_width() > self.max_len {
            return fail(format!(
                "widest filter ({}) exceeds cnn.max_len ({})",
                self.max_width(),
                self.max_len
            ));
        }
        if self.filters_per_width == 0 {
            return fail("cnn.filters_per_width must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!(
                "cnn.dropout must lie in [0, 1), got {}",
                self.dropout
            ));
        }
        if self.variant.uses_words() && self.word_dim == 0 {
            return fail("cnn.word_dim must be at least 1".into());
        }
        if self.variant.uses_pos() && self.pos_dim == 0 {
            return fail("cnn.pos_dim must be at least 1".into());
        }
        if self.variant == Variant::Combined && self.merge_hidden == 0 {
            return fail("cnn.merge_hidden must be at least 1".into());
        }
        if self.batch_size == 0 || self.epochs == 0 || self.min_count == 0 {
            return fail("cnn.batch_size, cnn.epochs and cnn.min_count must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0) {
            return fail("cnn.learning_rate must be non-negative".into());
        }
        Ok(())
    }
}
