use super::{Grads, Model, Scalar};
use crate::text::EncodedSentence;
use crate::Result;

/// Adam with bias correction. Embedding tables are updated lazily: only
/// rows that received gradient in the current step move, and their moment
/// estimates are left untouched otherwise.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Model<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<T>> = model
            .params
            .iter()
            .map(|p| {
                if p.trainable {
                    vec![T::zero(); p.data.len()]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut Model<T>, grads: &Grads<T>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::of(1.0 - self.beta1.powi(t));
        let c2 = T::of(1.0 - self.beta2.powi(t));
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (lr, eps) = (T::of(self.learning_rate), T::of(self.epsilon));
        let one = T::one();
        for (i, p) in model.params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads.data[i]);
            let is_embedding = p.embedding;
            let dim = p.shape.last().copied().unwrap_or(1);
            let len = p.data.len();
            let data = &mut p.data;
            let mut update = |j: usize| {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                data[j] = data[j] - lr * mh / (vh.sqrt() + eps);
            };
            if is_embedding {
                for &r in &grads.touched[i] {
                    if r == crate::text::Vocabulary::PAD {
                        continue;
                    }
                    (r * dim..(r + 1) * dim).for_each(&mut update);
                }
            } else {
                (0..len).for_each(update);
            }
        }
    }
}

impl<T: Scalar> Model<T> {
    /// One optimization step on a batch: gradients of the mean loss, then
    /// an Adam update. Returns the mean loss and the number of correct
    /// (training-mode) predictions.
    pub fn backward_and_step(
        &mut self,
        batch: &[&EncodedSentence],
        labels: &[u8],
        masks: Option<&[Vec<T>]>,
        grads: &mut Grads<T>,
        optimizer: &mut Adam<T>,
    ) -> Result<(T, usize)> {
        let out = self.gradients(batch, labels, masks, grads)?;
        optimizer.step(self, grads);
        Ok(out)
    }
}
