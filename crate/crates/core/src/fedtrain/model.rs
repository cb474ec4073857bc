use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{DeviceDataset, Example};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Squared loss `1/2 (w.x - r)^2`, no implicit bias.
    LinearRegression,
    /// Multinomial logistic regression, weights laid out class-major.
    LogisticRegression,
    /// One tanh hidden layer with softmax output.
    SmallMlp,
}

/// A differentiable model with a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub classes: usize,
    pub hidden: usize,
}

impl Model {
    pub const MAX_HIDDEN: usize = 64;

    pub fn linear_regression(input_dim: usize) -> Self {
        Self {
            kind: ModelKind::LinearRegression,
            input_dim,
            classes: 1,
            hidden: 0,
        }
    }

    pub fn logistic_regression(input_dim: usize, classes: usize) -> Self {
        Self {
            kind: ModelKind::LogisticRegression,
            input_dim,
            classes,
            hidden: 0,
        }
    }

    pub fn small_mlp(input_dim: usize, hidden: usize, classes: usize) -> Self {
        Self {
            kind: ModelKind::SmallMlp,
            input_dim,
            classes,
            hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument(
                "model input dimension is zero".into(),
            ));
        }
        match self.kind {
            ModelKind::LinearRegression => Ok(()),
            ModelKind::LogisticRegression | ModelKind::SmallMlp if self.classes < 2 => Err(
                Error::InvalidArgument("classification needs at least two classes".into()),
            ),
            ModelKind::SmallMlp if self.hidden == 0 || self.hidden > Self::MAX_HIDDEN => {
                Err(Error::InvalidArgument(format!(
                    "hidden width must be in 1..={} (got {})",
                    Self::MAX_HIDDEN,
                    self.hidden
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn is_classifier(&self) -> bool {
        self.kind != ModelKind::LinearRegression
    }

    pub fn num_params(&self) -> usize {
        let (d, c, h) = (self.input_dim, self.classes, self.hidden);
        match self.kind {
            ModelKind::LinearRegression => d,
            ModelKind::LogisticRegression => c * d,
            ModelKind::SmallMlp => h * d + h + c * h + c,
        }
    }

    /// Zeros for the convex models; uniform in `+-1/sqrt(fan_in)` for the MLP.
    pub fn init_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            ModelKind::LinearRegression | ModelKind::LogisticRegression => {
                vec![0.0; self.num_params()]
            }
            ModelKind::SmallMlp => {
                let (d, c, h) = (self.input_dim, self.classes, self.hidden);
                let mut w = Vec::with_capacity(self.num_params());
                let r1 = 1.0 / (d as f64).sqrt();
                w.extend((0..h * d).map(|_| rng.random_range(-r1..r1)));
                w.extend(std::iter::repeat_n(0.0, h));
                let r2 = 1.0 / (h as f64).sqrt();
                w.extend((0..c * h).map(|_| rng.random_range(-r2..r2)));
                w.extend(std::iter::repeat_n(0.0, c));
                w
            }
        }
    }

    /// Loss of one example; when `grad` is given, its gradient is added
    /// into it.
    fn example_loss(&self, w: &[f64], e: &Example, grad: Option<&mut [f64]>) -> f64 {
        let x = &e.features;
        let d = self.input_dim;
        match self.kind {
            ModelKind::LinearRegression => {
                let residual = dot(w, x) - e.label;
                if let Some(g) = grad {
                    axpy(residual, x, g);
                }
                0.5 * residual * residual
            }
            ModelKind::LogisticRegression => {
                let logits: Vec<f64> = w.chunks_exact(d).map(|row| dot(row, x)).collect();
                let (probs, lse) = softmax(&logits);
                let y = e.class();
                if let Some(g) = grad {
                    for (c, row) in g.chunks_exact_mut(d).enumerate() {
                        let delta = probs[c] - f64::from(u8::from(c == y));
                        axpy(delta, x, row);
                    }
                }
                lse - logits[y]
            }
            ModelKind::SmallMlp => {
                let (h, c) = (self.hidden, self.classes);
                let (w1, rest) = w.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let act: Vec<f64> = w1
                    .chunks_exact(d)
                    .zip(b1)
                    .map(|(row, b)| (dot(row, x) + b).tanh())
                    .collect();
                let logits: Vec<f64> = w2
                    .chunks_exact(h)
                    .zip(b2)
                    .map(|(row, b)| dot(row, &act) + b)
                    .collect();
                let (probs, lse) = softmax(&logits);
                let y = e.class();
                if let Some(g) = grad {
                    let (g1, rest) = g.split_at_mut(h * d);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (g2, gb2) = rest.split_at_mut(c * h);
                    let mut back = vec![0.0; h];
                    for k in 0..c {
                        let delta = probs[k] - f64::from(u8::from(k == y));
                        gb2[k] += delta;
                        axpy(delta, &act, &mut g2[k * h..(k + 1) * h]);
                        axpy(delta, &w2[k * h..(k + 1) * h], &mut back);
                    }
                    for j in 0..h {
                        let pre = back[j] * (1.0 - act[j] * act[j]);
                        gb1[j] += pre;
                        axpy(pre, x, &mut g1[j * d..(j + 1) * d]);
                    }
                }
                lse - logits[y]
            }
        }
    }

    /// Mean loss over `examples`.
    pub fn loss<'a, I>(&self, w: &[f64], examples: I) -> f64
    where
        I: IntoIterator<Item = &'a Example>,
    {
        let (mut total, mut n) = (0.0, 0usize);
        for e in examples {
            total += self.example_loss(w, e, None);
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Gradient of the mean loss over `examples`.
    pub fn gradient<'a, I>(&self, w: &[f64], examples: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a Example>,
    {
        let mut g = vec![0.0; self.num_params()];
        let mut n = 0usize;
        for e in examples {
            self.example_loss(w, e, Some(&mut g));
            n += 1;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            g.iter_mut().for_each(|v| *v *= inv);
        }
        g
    }

    pub fn predict_class(&self, w: &[f64], x: &[f64]) -> Option<usize> {
        let d = self.input_dim;
        let logits: Vec<f64> = match self.kind {
            ModelKind::LinearRegression => return None,
            ModelKind::LogisticRegression => w.chunks_exact(d).map(|row| dot(row, x)).collect(),
            ModelKind::SmallMlp => {
                let (h, c) = (self.hidden, self.classes);
                let (w1, rest) = w.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let act: Vec<f64> = w1
                    .chunks_exact(d)
                    .zip(b1)
                    .map(|(row, b)| (dot(row, x) + b).tanh())
                    .collect();
                w2.chunks_exact(h)
                    .zip(b2)
                    .map(|(row, b)| dot(row, &act) + b)
                    .collect()
            }
        };
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(c, _)| c)
    }

    /// Fraction of correctly classified examples, `None` for regression.
    pub fn accuracy<'a, I>(&self, w: &[f64], examples: I) -> Option<f64>
    where
        I: IntoIterator<Item = &'a Example>,
    {
        if !self.is_classifier() {
            return None;
        }
        let (mut hits, mut n) = (0usize, 0usize);
        for e in examples {
            hits += usize::from(self.predict_class(w, &e.features) == Some(e.class()));
            n += 1;
        }
        (n > 0).then(|| hits as f64 / n as f64)
    }
}

/// Mini-batch gradient of a device's local loss. Batches are drawn without
/// replacement; `batch_size >= N_k` gives the full-batch gradient.
pub fn local_gradient<R: Rng + ?Sized>(
    model: &Model,
    weights: &[f64],
    data: &DeviceDataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if weights.len() != model.num_params() {
        return Err(Error::LengthMismatch {
            expected: model.num_params(),
            found: weights.len(),
        });
    }
    if batch_size == 0 || batch_size >= data.len() {
        return Ok(model.gradient(weights, &data.examples));
    }
    let picks = index::sample(rng, data.len(), batch_size);
    Ok(model.gradient(weights, picks.iter().map(|i| &data.examples[i])))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Softmax probabilities and log-sum-exp of the logits.
fn softmax(logits: &[f64]) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (exps.iter().map(|e| e / sum).collect(), max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn random_examples(n: usize, d: usize, classes: usize, seed: u64) -> Vec<Example> {
        let mut rng = stream(seed, "examples", 0);
        (0..n)
            .map(|_| Example {
                features: (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
                label: rng.random_range(0..classes.max(1)) as f64,
            })
            .collect()
    }

    fn check_finite_differences(model: Model, seed: u64) {
        let data = random_examples(12, model.input_dim, model.classes, seed);
        let mut rng = stream(seed, "weights", 0);
        let w: Vec<f64> = (0..model.num_params())
            .map(|_| rng.random_range(-0.8..0.8))
            .collect();
        let g = model.gradient(&w, &data);
        let eps = 1e-5;
        for _ in 0..20 {
            let i = rng.random_range(0..w.len());
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += eps;
            wm[i] -= eps;
            let fd = (model.loss(&wp, &data) - model.loss(&wm, &data)) / (2.0 * eps);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            assert!(
                rel < 1e-4,
                "{:?} coord {i}: fd {fd} vs {}",
                model.kind,
                g[i]
            );
        }
    }

    #[test]
    fn linear_regression_hand_derivative() {
        let m = Model::linear_regression(1);
        let e = Example {
            features: vec![1.0],
            label: 0.0,
        };
        assert_eq!(m.gradient(&[1.0], [&e]), vec![1.0]);
        assert_eq!(m.loss(&[1.0], [&e]), 0.5);
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_finite_differences(Model::linear_regression(5), 1);
        check_finite_differences(Model::logistic_regression(4, 3), 2);
        check_finite_differences(Model::small_mlp(3, 6, 4), 3);
    }

    #[test]
    fn full_batch_is_mean_of_per_example_gradients() {
        let m = Model::logistic_regression(3, 4);
        let data = random_examples(9, 3, 4, 4);
        let w: Vec<f64> = (0..m.num_params())
            .map(|i| (i as f64 * 0.37).sin())
            .collect();
        let full = m.gradient(&w, &data);
        let mut mean = vec![0.0; full.len()];
        for e in &data {
            for (acc, v) in mean.iter_mut().zip(m.gradient(&w, [e])) {
                *acc += v / data.len() as f64;
            }
        }
        for (a, b) in full.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn local_gradient_batches() {
        let m = Model::linear_regression(2);
        let shard = DeviceDataset::new(random_examples(10, 2, 1, 5), false);
        let w = [0.3, -0.2];
        let mut rng = stream(0, "batch", 0);
        let full = local_gradient(&m, &w, &shard, 10, &mut rng).unwrap();
        assert_eq!(full, m.gradient(&w, &shard.examples));
        let mini = local_gradient(&m, &w, &shard, 4, &mut rng).unwrap();
        assert_eq!(mini.len(), 2);
        assert!(matches!(
            local_gradient(&m, &w, &DeviceDataset::default(), 4, &mut rng),
            Err(Error::EmptyDataset)
        ));
        assert!(local_gradient(&m, &[0.0], &shard, 4, &mut rng).is_err());
    }

    #[test]
    fn parameter_counts_and_init() {
        assert_eq!(Model::logistic_regression(21, 10).num_params(), 210);
        let mlp = Model::small_mlp(4, 8, 3);
        assert_eq!(mlp.num_params(), 8 * 4 + 8 + 3 * 8 + 3);
        let w = mlp.init_weights(&mut stream(0, "init", 0));
        assert_eq!(w.len(), mlp.num_params());
        assert!(w.iter().any(|v| *v != 0.0));
        assert!(Model::small_mlp(4, 65, 3).validate().is_err());
        assert!(Model::logistic_regression(4, 1).validate().is_err());
    }

    #[test]
    fn accuracy_of_perfect_classifier() {
        let m = Model::logistic_regression(2, 2);
        let data = vec![
            Example {
                features: vec![1.0, 0.0],
                label: 0.0,
            },
            Example {
                features: vec![0.0, 1.0],
                label: 1.0,
            },
        ];
        let w = [5.0, 0.0, 0.0, 5.0];
        assert_eq!(m.accuracy(&w, &data), Some(1.0));
        assert_eq!(Model::linear_regression(2).accuracy(&w, &data), None);
    }
}
