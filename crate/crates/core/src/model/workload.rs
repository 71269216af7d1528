//! Desk-scale models with hand-written gradients.

use rand::Rng;
use rand_distr::StandardNormal;

use super::ParamVector;
use crate::data::Sample;

/// A differentiable per-sample loss over flat parameters.
pub trait Model: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    /// Loss on one sample. When `grad` is given, the sample's gradient is
    /// added to it.
    fn sample_loss(&self, x: &[f64], sample: &Sample, grad: Option<&mut [f64]>) -> f64;

    /// Predicted class, if the model is a classifier.
    fn predict(&self, x: &[f64], features: &[f64]) -> Option<usize>;

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector
    where
        Self: Sized;

    /// Mean loss over `samples`; `grad` (if any) is overwritten with the mean gradient.
    fn mean_loss(
        &self,
        x: &[f64],
        samples: &mut dyn Iterator<Item = &Sample>,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for s in samples {
            total += self.sample_loss(x, s, grad.as_deref_mut());
            count += 1;
        }
        if count == 0 {
            return 0.0;
        }
        let inv = 1.0 / count as f64;
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v *= inv);
        }
        total * inv
    }
}

/// `½‖x − a‖²` with `a` the sample's features.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub dim: usize,
}

impl Model for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_loss(&self, x: &[f64], sample: &Sample, grad: Option<&mut [f64]>) -> f64 {
        let mut loss = 0.0;
        match grad {
            Some(g) => {
                for ((gi, xi), ai) in g.iter_mut().zip(x).zip(&sample.features) {
                    let r = xi - ai;
                    loss += r * r;
                    *gi += r;
                }
            }
            None => {
                for (xi, ai) in x.iter().zip(&sample.features) {
                    loss += (xi - ai) * (xi - ai);
                }
            }
        }
        0.5 * loss
    }

    fn predict(&self, _x: &[f64], _features: &[f64]) -> Option<usize> {
        None
    }

    fn init<R: Rng + ?Sized>(&self, _rng: &mut R) -> ParamVector {
        ParamVector::zeros(self.dim)
    }
}

fn log_softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|z| *z -= lse);
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Multinomial logistic regression. Layout: `W` (classes × features,
/// row-major) then `b`.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    pub features: usize,
    pub classes: usize,
    /// Ridge weight on `W`.
    pub l2: f64,
}

impl SoftmaxRegression {
    fn logits(&self, x: &[f64], features: &[f64]) -> Vec<f64> {
        let (w, b) = x.split_at(self.classes * self.features);
        (0..self.classes)
            .map(|c| {
                let row = &w[c * self.features..(c + 1) * self.features];
                b[c] + row.iter().zip(features).map(|(a, f)| a * f).sum::<f64>()
            })
            .collect()
    }
}

impl Model for SoftmaxRegression {
    fn dim(&self) -> usize {
        self.classes * (self.features + 1)
    }

    fn sample_loss(&self, x: &[f64], sample: &Sample, grad: Option<&mut [f64]>) -> f64 {
        let mut logp = self.logits(x, &sample.features);
        log_softmax_in_place(&mut logp);
        let nw = self.classes * self.features;
        let ridge = 0.5 * self.l2 * x[..nw].iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad {
            let (gw, gb) = g.split_at_mut(nw);
            for c in 0..self.classes {
                let delta = logp[c].exp() - if c == sample.label { 1.0 } else { 0.0 };
                gb[c] += delta;
                let row = &mut gw[c * self.features..(c + 1) * self.features];
                let xrow = &x[c * self.features..(c + 1) * self.features];
                for ((gi, f), wi) in row.iter_mut().zip(&sample.features).zip(xrow) {
                    *gi += delta * f + self.l2 * wi;
                }
            }
        }
        -logp[sample.label] + ridge
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> Option<usize> {
        Some(argmax(&self.logits(x, features)))
    }

    fn init<R: Rng + ?Sized>(&self, _rng: &mut R) -> ParamVector {
        ParamVector::zeros(self.dim())
    }
}

/// One tanh hidden layer, softmax output. Layout: `W1` (hidden × features),
/// `b1`, `W2` (classes × hidden), `b2`.
#[derive(Debug, Clone)]
pub struct TwoLayerNet {
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl TwoLayerNet {
    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.features;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        [w1, b1, w2, b2]
    }

    fn forward(&self, x: &[f64], features: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let [_, b1, w2, b2] = self.offsets();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &x[j * self.features..(j + 1) * self.features];
                (x[b1 + j] + row.iter().zip(features).map(|(a, f)| a * f).sum::<f64>()).tanh()
            })
            .collect();
        let logits = (0..self.classes)
            .map(|c| {
                let row = &x[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
                x[b2 + c] + row.iter().zip(&hidden).map(|(a, h)| a * h).sum::<f64>()
            })
            .collect();
        (hidden, logits)
    }
}

impl Model for TwoLayerNet {
    fn dim(&self) -> usize {
        self.offsets()[3] + self.classes
    }

    fn sample_loss(&self, x: &[f64], sample: &Sample, grad: Option<&mut [f64]>) -> f64 {
        let (hidden, mut logp) = self.forward(x, &sample.features);
        log_softmax_in_place(&mut logp);
        if let Some(g) = grad {
            let [_, b1, w2, b2] = self.offsets();
            let mut back = vec![0.0; self.hidden];
            for c in 0..self.classes {
                let delta = logp[c].exp() - if c == sample.label { 1.0 } else { 0.0 };
                g[b2 + c] += delta;
                for j in 0..self.hidden {
                    g[w2 + c * self.hidden + j] += delta * hidden[j];
                    back[j] += delta * x[w2 + c * self.hidden + j];
                }
            }
            for j in 0..self.hidden {
                let pre = back[j] * (1.0 - hidden[j] * hidden[j]);
                g[b1 + j] += pre;
                for (k, f) in sample.features.iter().enumerate() {
                    g[j * self.features + k] += pre * f;
                }
            }
        }
        -logp[sample.label]
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> Option<usize> {
        Some(argmax(&self.forward(x, features).1))
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let [_, b1, w2, b2] = self.offsets();
        let mut x = ParamVector::zeros(self.dim());
        let s1 = (1.0 / self.features as f64).sqrt();
        let s2 = (1.0 / self.hidden as f64).sqrt();
        for v in &mut x[..b1] {
            *v = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for v in &mut x[w2..b2] {
            *v = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        x
    }
}

/// The workloads a run can select.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Quadratic(Quadratic),
    Logistic(SoftmaxRegression),
    Mlp(TwoLayerNet),
}

impl AnyModel {
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        match self {
            AnyModel::Quadratic(m) => m.init(rng),
            AnyModel::Logistic(m) => m.init(rng),
            AnyModel::Mlp(m) => m.init(rng),
        }
    }
}

impl Model for AnyModel {
    fn dim(&self) -> usize {
        match self {
            AnyModel::Quadratic(m) => m.dim(),
            AnyModel::Logistic(m) => m.dim(),
            AnyModel::Mlp(m) => m.dim(),
        }
    }

    fn sample_loss(&self, x: &[f64], sample: &Sample, grad: Option<&mut [f64]>) -> f64 {
        match self {
            AnyModel::Quadratic(m) => m.sample_loss(x, sample, grad),
            AnyModel::Logistic(m) => m.sample_loss(x, sample, grad),
            AnyModel::Mlp(m) => m.sample_loss(x, sample, grad),
        }
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> Option<usize> {
        match self {
            AnyModel::Quadratic(m) => m.predict(x, features),
            AnyModel::Logistic(m) => m.predict(x, features),
            AnyModel::Mlp(m) => m.predict(x, features),
        }
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        AnyModel::init(self, rng)
    }
}
