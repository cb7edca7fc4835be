//! Pluggable four-class patch classifier and the built-in linear soft-max model.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::CompoundClass;
use crate::error::{Error, Result};
use crate::glcm::{FeatureVector, FEATURE_COUNT};
use crate::rng;

pub const CLASSES: usize = 4;

/// Anything that maps a feature vector to a probability 4-vector over
/// `(P+, P-, N+, N-)` and can be fitted on labelled twins.
pub trait PatchClassifier {
    fn predict(&self, f: &FeatureVector) -> [f64; CLASSES];

    /// Runs `cfg.epochs` epochs and returns the loss recorded before each one.
    fn fit(&mut self, batch: &[(FeatureVector, CompoundClass)], cfg: &TrainConfig) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Per-feature affine normalization fitted on a training batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; FEATURE_COUNT],
    pub scale: [f64; FEATURE_COUNT],
}

impl Standardizer {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; FEATURE_COUNT],
            scale: [1.0; FEATURE_COUNT],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let rows: Vec<&FeatureVector> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.0.iter()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; FEATURE_COUNT];
        for r in &rows {
            for k in 0..FEATURE_COUNT {
                var[k] += (r.0[k] - mean[k]).powi(2) / n;
            }
        }
        let scale = var.map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });
        Self { mean, scale }
    }

    pub fn apply(&self, f: &FeatureVector) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for k in 0..FEATURE_COUNT {
            out[k] = (f.0[k] - self.mean[k]) / self.scale[k];
        }
        out
    }
}

pub fn softmax(z: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// 22 → 4 soft-max regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSoftmax {
    pub weights: [[f64; FEATURE_COUNT]; CLASSES],
    pub bias: [f64; CLASSES],
    pub standardizer: Option<Standardizer>,
}

impl LinearSoftmax {
    pub fn zeros() -> Self {
        Self {
            weights: [[0.0; FEATURE_COUNT]; CLASSES],
            bias: [0.0; CLASSES],
            standardizer: None,
        }
    }

    /// Small Gaussian initial weights drawn from `seed`.
    pub fn init(seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::streams::TRAIN);
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let mut m = Self::zeros();
        for row in m.weights.iter_mut() {
            for w in row.iter_mut() {
                *w = normal.sample(&mut r);
            }
        }
        m
    }

    pub const PARAM_COUNT: usize = CLASSES * (FEATURE_COUNT + 1);

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::PARAM_COUNT);
        for c in 0..CLASSES {
            out.extend_from_slice(&self.weights[c]);
            out.push(self.bias[c]);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), Self::PARAM_COUNT);
        for c in 0..CLASSES {
            let row = &p[c * (FEATURE_COUNT + 1)..(c + 1) * (FEATURE_COUNT + 1)];
            self.weights[c].copy_from_slice(&row[..FEATURE_COUNT]);
            self.bias[c] = row[FEATURE_COUNT];
        }
    }

    fn standardize(&self, f: &FeatureVector) -> [f64; FEATURE_COUNT] {
        match &self.standardizer {
            Some(s) => s.apply(f),
            None => f.0,
        }
    }

    fn logits(&self, x: &[f64; FEATURE_COUNT]) -> [f64; CLASSES] {
        let mut z = self.bias;
        for (zc, row) in z.iter_mut().zip(self.weights.iter()) {
            *zc += row.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    /// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases unpenalized).
    pub fn loss(&self, batch: &[(FeatureVector, CompoundClass)], l2: f64) -> f64 {
        let n = batch.len().max(1) as f64;
        let ce: f64 = batch
            .iter()
            .map(|(f, y)| {
                let p = softmax(&self.logits(&self.standardize(f)));
                -p[y.index()].max(f64::MIN_POSITIVE).ln()
            })
            .sum::<f64>()
            / n;
        let reg: f64 = self.weights.iter().flatten().map(|w| w * w).sum::<f64>();
        ce + 0.5 * l2 * reg
    }

    /// Analytic gradient of [`Self::loss`] in [`Self::params`] layout.
    pub fn gradient(&self, batch: &[(FeatureVector, CompoundClass)], l2: f64) -> Vec<f64> {
        let n = batch.len().max(1) as f64;
        let stride = FEATURE_COUNT + 1;
        let mut g = vec![0.0; Self::PARAM_COUNT];
        for (f, y) in batch {
            let x = self.standardize(f);
            let mut delta = softmax(&self.logits(&x));
            delta[y.index()] -= 1.0;
            for c in 0..CLASSES {
                let d = delta[c] / n;
                let row = &mut g[c * stride..(c + 1) * stride];
                for k in 0..FEATURE_COUNT {
                    row[k] += d * x[k];
                }
                row[FEATURE_COUNT] += d;
            }
        }
        for c in 0..CLASSES {
            for k in 0..FEATURE_COUNT {
                g[c * stride + k] += l2 * self.weights[c][k];
            }
        }
        g
    }
}

impl PatchClassifier for LinearSoftmax {
    fn predict(&self, f: &FeatureVector) -> [f64; CLASSES] {
        softmax(&self.logits(&self.standardize(f)))
    }

    fn fit(&mut self, batch: &[(FeatureVector, CompoundClass)], cfg: &TrainConfig) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {}", cfg.lr)));
        }
        if cfg.epochs == 0 {
            return Ok(Vec::new());
        }
        if self.standardizer.is_none() {
            self.standardizer = Some(Standardizer::fit(batch.iter().map(|(f, _)| f)));
        }
        let mut losses = Vec::with_capacity(cfg.epochs);
        let mut params = self.params();
        for _ in 0..cfg.epochs {
            losses.push(self.loss(batch, cfg.l2));
            let g = self.gradient(batch, cfg.l2);
            for (p, gi) in params.iter_mut().zip(g.iter()) {
                *p -= cfg.lr * gi;
            }
            self.set_params(&params);
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_batch() -> Vec<(FeatureVector, CompoundClass)> {
        let mut out = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            for (c, centre) in [(CompoundClass::PPlus, 3.0), (CompoundClass::NPlus, -3.0)] {
                let mut f = FeatureVector::zeros();
                f.0[0] = centre + t;
                f.0[1] = centre * 0.5 - t;
                f.0[5] = t * 2.0;
                out.push((f, c));
            }
        }
        out
    }

    #[test]
    fn predict_is_distribution() {
        let m = LinearSoftmax::init(3);
        let mut f = FeatureVector::zeros();
        f.0[3] = 40.0;
        let p = m.predict(&f);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_epochs_leaves_model() {
        let mut m = LinearSoftmax::init(1);
        let before = m.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(m.fit(&separable_batch(), &cfg).unwrap().is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn empty_batch_errors() {
        let mut m = LinearSoftmax::init(1);
        assert!(matches!(
            m.fit(&[], &TrainConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn fits_separable_data_with_monotone_loss() {
        let batch = separable_batch();
        let mut m = LinearSoftmax::init(7);
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let losses = m.fit(&batch, &cfg).unwrap();
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let correct = batch
            .iter()
            .filter(|(f, y)| {
                let p = m.predict(f);
                let arg = (0..CLASSES).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
                arg == y.index()
            })
            .count();
        assert!(correct as f64 / batch.len() as f64 >= 0.99);
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(LinearSoftmax::init(9), LinearSoftmax::init(9));
        assert_ne!(LinearSoftmax::init(9), LinearSoftmax::init(10));
    }

    #[test]
    fn params_roundtrip() {
        let m = LinearSoftmax::init(5);
        let mut z = LinearSoftmax::zeros();
        z.set_params(&m.params());
        assert_eq!(z.weights, m.weights);
    }
}
