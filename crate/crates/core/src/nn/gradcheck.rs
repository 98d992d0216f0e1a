use rand::seq::SliceRandom;
use serde::Serialize;

use super::{Grads, Model};
use crate::text::{EncodedSentence, Vocabulary};
use crate::{rng, Result};

/// Something with a scalar loss and analytic gradients.
pub trait GradTarget {
    /// Tensor names with the flat indices that may be probed.
    fn tensors(&self) -> Vec<(String, Vec<usize>)>;
    fn get(&self, tensor: usize, index: usize) -> f64;
    fn set(&mut self, tensor: usize, index: usize, value: f64);
    fn loss(&self) -> f64;
    fn gradient(&self) -> Vec<Vec<f64>>;
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Entries eligible for checking.
    pub candidates: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_relative_error: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients with central differences on up to
/// `per_tensor` sampled entries of every tensor.
pub fn grad_check<G: GradTarget>(
    target: &mut G,
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
) -> GradCheckReport {
    let analytic = target.gradient();
    let mut rng = rng::substream(seed, "gradcheck");
    let mut tensors = Vec::new();
    for (ti, (name, mut candidates)) in target.tensors().into_iter().enumerate() {
        let total = candidates.len();
        candidates.shuffle(&mut rng);
        candidates.truncate(per_tensor);
        candidates.sort_unstable();
        let mut worst = 0f64;
        for &j in &candidates {
            let orig = target.get(ti, j);
            target.set(ti, j, orig + epsilon);
            let up = target.loss();
            target.set(ti, j, orig - epsilon);
            let down = target.loss();
            target.set(ti, j, orig);
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic[ti][j], numeric));
        }
        tensors.push(TensorCheck {
            name,
            checked: candidates.len(),
            candidates: total,
            max_relative_error: worst,
        });
    }
    let max_relative_error = tensors
        .iter()
        .map(|t| t.max_relative_error)
        .fold(0.0, f64::max);
    GradCheckReport {
        tensors,
        max_relative_error,
    }
}

/// A double-precision model evaluated on a fixed batch with frozen
/// dropout masks.
pub struct BatchObjective<'a> {
    pub model: Model<f64>,
    pub batch: Vec<&'a EncodedSentence>,
    pub labels: Vec<u8>,
    pub masks: Option<Vec<Vec<f64>>>,
}

impl BatchObjective<'_> {
    fn used_rows(&self, tensor: usize) -> Vec<usize> {
        let pos = self.model.params[tensor].name.starts_with("pos.");
        let mut rows: Vec<usize> = self
            .batch
            .iter()
            .flat_map(|ex| {
                let idx = if pos {
                    ex.pos_indices.as_deref().unwrap_or(&[])
                } else {
                    &ex.indices[..]
                };
                idx[..ex.true_length.min(idx.len())].to_vec()
            })
            .filter(|&r| r != Vocabulary::PAD)
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

impl GradTarget for BatchObjective<'_> {
    fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        self.model
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.trainable)
            .map(|(i, p)| {
                let idx = if p.embedding {
                    let dim = p.shape[1];
                    self.used_rows(i)
                        .into_iter()
                        .flat_map(|r| r * dim..(r + 1) * dim)
                        .collect()
                } else {
                    (0..p.data.len()).collect()
                };
                (p.name.clone(), idx)
            })
            .collect()
    }

    fn get(&self, tensor: usize, index: usize) -> f64 {
        self.model.params[self.trainable_index(tensor)].data[index]
    }

    fn set(&mut self, tensor: usize, index: usize, value: f64) {
        let t = self.trainable_index(tensor);
        self.model.params[t].data[index] = value;
    }

    fn loss(&self) -> f64 {
        self.model
            .batch_loss(&self.batch, &self.labels, self.masks.as_deref())
            .expect("batch validated on construction")
    }

    fn gradient(&self) -> Vec<Vec<f64>> {
        let mut grads = Grads::zeros_like(&self.model);
        self.model
            .gradients(&self.batch, &self.labels, self.masks.as_deref(), &mut grads)
            .expect("batch validated on construction");
        grads
            .data
            .into_iter()
            .zip(&self.model.params)
            .filter(|(_, p)| p.trainable)
            .map(|(g, _)| g)
            .collect()
    }
}

impl<'a> BatchObjective<'a> {
    pub fn new(
        model: Model<f64>,
        batch: Vec<&'a EncodedSentence>,
        labels: Vec<u8>,
        masks: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        model.batch_loss(&batch, &labels, masks.as_deref())?;
        Ok(BatchObjective {
            model,
            batch,
            labels,
            masks,
        })
    }

    fn trainable_index(&self, tensor: usize) -> usize {
        self.model
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.trainable)
            .nth(tensor)
            .map(|(i, _)| i)
            .expect("tensor index in range")
    }
}
