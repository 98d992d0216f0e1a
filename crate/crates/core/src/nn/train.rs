use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Adam, Grads, Model, ModelConfig, Scalar};
use crate::corpus::LabeledDataset;
use crate::embeddings::{init_for_vocab, EmbeddingTable};
use crate::text::{EncodedSentence, Vocabulary};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training-mode (dropout) predictions seen during the epoch.
    pub train_accuracy: f64,
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_eval_accuracy: f64,
}

/// Encodes every example of `dataset` for `model`.
pub fn encode_dataset<T: Scalar>(
    model: &Model<T>,
    dataset: &LabeledDataset,
) -> Result<Vec<EncodedSentence>> {
    let needs_tags = model.config.variant.uses_pos();
    dataset
        .examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let tags = match (&ex.pos_tags, needs_tags) {
                (Some(t), true) => Some(t.as_slice()),
                (None, true) => {
                    return Err(Error::invalid(format!(
                        "{}: example {i} has no POS tags",
                        dataset.name
                    )))
                }
                (_, false) => None,
            };
            model
                .encode(&ex.tokens, tags)
                .map_err(|e| Error::invalid(format!("{}: example {i}: {e}", dataset.name)))
        })
        .collect()
}

fn accuracy<T: Scalar>(
    model: &Model<T>,
    encoded: &[EncodedSentence],
    labels: &[u8],
) -> Result<f64> {
    let probs = model.predict_batch(encoded)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| u8::from(p[1] > p[0]) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Trains a CNN on `train`, evaluating after every epoch on `eval`, and
/// returns the parameters of the best-scoring epoch (earliest on ties).
///
/// With `embeddings`, the word vocabulary rows found in the table start
/// from the pretrained vectors and `config.word_dim` must match its
/// dimension.
pub fn train_model(
    config: &ModelConfig,
    train: &LabeledDataset,
    eval: &LabeledDataset,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(Model<f32>, TrainReport)> {
    config.validate()?;
    if train.is_empty() || eval.is_empty() {
        return Err(Error::invalid(
            "training and evaluation sets must be non-empty",
        ));
    }
    train.require_both_classes()?;
    let vocab = if config.variant.uses_words() {
        Vocabulary::from_token_lists(
            train.examples.iter().map(|e| e.tokens.as_slice()),
            config.min_count,
        )
    } else {
        Vocabulary::from_words(std::iter::empty())
    };
    let word_init = if config.variant.uses_words() {
        Some(init_for_vocab(
            embeddings,
            &vocab,
            config.word_dim,
            rng::derive_seed(config.seed, "word-embedding"),
        )?)
    } else {
        None
    };
    let mut model = Model::<f32>::new(config.clone(), vocab, Vocabulary::tagset(), word_init)?;
    let train_enc = encode_dataset(&model, train)?;
    let eval_enc = encode_dataset(&model, eval)?;
    let train_labels = train.labels();
    let eval_labels = eval.labels();

    let mut grads = Grads::zeros_like(&model);
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut shuffle_rng = rng::substream(config.seed, rng::SHUFFLE);
    let mut dropout_rng = rng::substream(config.seed, rng::DROPOUT);
    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedSentence> = chunk.iter().map(|&i| &train_enc[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_labels[i]).collect();
            let masks: Option<Vec<Vec<f32>>> = (config.dropout > 0.0).then(|| {
                chunk
                    .iter()
                    .map(|_| model.sample_mask(&mut dropout_rng))
                    .collect()
            });
            let (l, c) = model.backward_and_step(
                &batch,
                &labels,
                masks.as_deref(),
                &mut grads,
                &mut adam,
            )?;
            loss_sum += f64::from(l) * chunk.len() as f64;
            correct += c;
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_accuracy: correct as f64 / order.len() as f64,
            eval_accuracy: accuracy(&model, &eval_enc, &eval_labels)?,
        };
        info!(
            "{} epoch {epoch}: loss {:.4} train acc {:.4} eval acc {:.4}",
            config.variant.name(),
            stats.train_loss,
            stats.train_accuracy,
            stats.eval_accuracy
        );
        if best.as_ref().is_none_or(|b| stats.eval_accuracy > b.0) {
            best = Some((stats.eval_accuracy, epoch, model.clone()));
        }
        epochs.push(stats);
    }
    let (best_eval_accuracy, best_epoch, model) = best.expect("at least one epoch");
    Ok((
        model,
        TrainReport {
            epochs,
            best_epoch,
            best_eval_accuracy,
        },
    ))
}
