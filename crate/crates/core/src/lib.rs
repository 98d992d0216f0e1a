//! Sentence-level detection of verbal aggression and binary sentiment.
//!
//! Two classifier families share one preprocessing pipeline:
//!
//! * a random forest over four embedding-distance features per sentence
//!   (sum, mean and range of each token's distance to a seed lexicon, plus
//!   the sentence length), see [`features`] and [`forest`];
//! * sentence CNNs with max-over-time pooling over word embeddings, over
//!   POS-tag embeddings, or both branches merged, see [`nn`].
//!
//! [`corpus`], [`text`] and [`embeddings`] provide the data plumbing, and
//! [`harness`] ties everything together into reproducible experiments and
//! the `aggro` command line tool.

// `!(x > 0.0)` is how NaN gets rejected alongside bad values.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::large_enum_variant,
    clippy::needless_range_loop
)]

pub mod corpus;
pub mod embeddings;
mod error;
pub mod features;
pub mod forest;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod text;

pub use error::{Error, Result};
