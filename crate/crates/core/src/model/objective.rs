use std::sync::Arc;

use rand::seq::SliceRandom;

use super::workload::{AnyModel, Model};
use crate::data::Sample;
use crate::rng::StreamRng;

/// Source of stochastic gradients for a client's local loop.
pub trait GradientOracle {
    /// Writes `g(y)` into `grad`.
    fn stochastic_gradient(&mut self, y: &[f64], grad: &mut [f64]);
}

/// Client `n`'s local loss `fₙ(x)`: the mean per-sample loss over its data.
#[derive(Debug, Clone)]
pub struct ClientObjective {
    pub id: usize,
    pub model: Arc<AnyModel>,
    pub data: Arc<Vec<Sample>>,
    pub batch_size: usize,
}

impl ClientObjective {
    pub fn loss(&self, x: &[f64]) -> f64 {
        self.model.mean_loss(x, &mut self.data.iter(), None)
    }

    pub fn full_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.model.mean_loss(x, &mut self.data.iter(), Some(grad))
    }

    /// Effective minibatch size, never larger than the local dataset.
    pub fn effective_batch(&self) -> usize {
        self.batch_size.clamp(1, self.data.len().max(1))
    }

    pub fn batch_gradient(&self, x: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        self.model
            .mean_loss(x, &mut batch.iter().map(|&i| &self.data[i]), Some(grad))
    }
}

/// Epoch-wise sampling without replacement. Each epoch is a fresh shuffle;
/// a tail shorter than one batch is dropped so every batch is a uniformly
/// random subset of the batch size.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
}

impl MinibatchSampler {
    pub fn new(len: usize, batch: usize) -> Self {
        let batch = batch.clamp(1, len.max(1));
        Self {
            order: (0..len).collect(),
            cursor: len,
            batch,
        }
    }

    pub fn next_batch(&mut self, rng: &mut StreamRng) -> &[usize] {
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch;
        &self.order[start..self.cursor]
    }
}

/// A client with its sampling state: the oracle that local SGD calls.
#[derive(Debug, Clone)]
pub struct Client {
    pub objective: ClientObjective,
    sampler: MinibatchSampler,
    rng: StreamRng,
}

impl Client {
    pub fn new(objective: ClientObjective, rng: StreamRng) -> Self {
        let sampler = MinibatchSampler::new(objective.data.len(), objective.batch_size);
        Self {
            objective,
            sampler,
            rng,
        }
    }

    pub fn id(&self) -> usize {
        self.objective.id
    }
}

impl GradientOracle for Client {
    fn stochastic_gradient(&mut self, y: &[f64], grad: &mut [f64]) {
        let batch = self.sampler.next_batch(&mut self.rng);
        self.objective.batch_gradient(y, batch, grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::workload::SoftmaxRegression;
    use crate::rng::{stream, Purpose};

    fn objective(batch: usize) -> ClientObjective {
        let data = (0..6)
            .map(|i| Sample {
                features: vec![i as f64 * 0.3 - 0.7, (i * i) as f64 * 0.1],
                label: i % 3,
            })
            .collect();
        ClientObjective {
            id: 0,
            model: Arc::new(AnyModel::Logistic(SoftmaxRegression {
                features: 2,
                classes: 3,
                l2: 0.0,
            })),
            data: Arc::new(data),
            batch_size: batch,
        }
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn minibatch_gradient_unbiased_over_all_subsets() {
        let obj = objective(4);
        let x: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.4).collect();
        let mut full = vec![0.0; 9];
        obj.full_gradient(&x, &mut full);
        let all = subsets(6, 4);
        let mut mean = [0.0; 9];
        let mut g = vec![0.0; 9];
        for s in &all {
            obj.batch_gradient(&x, s, &mut g);
            for (m, v) in mean.iter_mut().zip(&g) {
                *m += v / all.len() as f64;
            }
        }
        for (a, b) in mean.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_epochs_cover_without_replacement() {
        let mut s = MinibatchSampler::new(10, 5);
        let mut rng = stream(0, Purpose::Minibatch, 0);
        for _ in 0..20 {
            let mut seen: Vec<usize> = s.next_batch(&mut rng).to_vec();
            seen.extend_from_slice(s.next_batch(&mut rng));
            seen.sort();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sampler_drops_short_tail() {
        let mut s = MinibatchSampler::new(7, 3);
        let mut rng = stream(0, Purpose::Minibatch, 0);
        for _ in 0..50 {
            let b = s.next_batch(&mut rng).to_vec();
            assert_eq!(b.len(), 3);
            let mut d = b.clone();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), 3);
        }
        assert_eq!(MinibatchSampler::new(2, 32).batch, 2);
    }
}
