//! Two-layer linear readout with a softmax output, trained by mini-batch SGD
//! on cross-entropy.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic, write_json};

/// One reservoir output with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub probs: Vec<f64>,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(probs: Vec<f64>, label: usize) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidState(format!("example probabilities sum to {total}")));
        }
        Ok(Self { probs, label })
    }
}

/// `softmax(W2ᵀ W1ᵀ (s·x))` with no biases and no hidden activation.
///
/// `input_scale` is a fixed factor `s` on the input; it keeps the map linear
/// and only changes how fast SGD moves at a given learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
    input_scale: f64,
}

/// Gradient of the mean loss with respect to both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl ReadoutModel {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: DMatrix::zeros(input, hidden),
            w2: DMatrix::zeros(hidden, output),
            input_scale: 1.0,
        }
    }

    /// Gaussian initialisation with standard deviation `1/√fan_in`.
    pub fn random(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |rows: usize, cols: usize| {
            let dist = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).expect("positive std");
            DMatrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng))
        };
        let w1 = init(input, hidden);
        let w2 = init(hidden, output);
        Self {
            w1,
            w2,
            input_scale: 1.0,
        }
    }

    pub fn from_weights(w1: DMatrix<f64>, w2: DMatrix<f64>) -> Result<Self> {
        if w1.ncols() != w2.nrows() {
            return Err(Error::DimensionMismatch {
                expected: w1.ncols(),
                actual: w2.nrows(),
            });
        }
        Ok(Self {
            w1,
            w2,
            input_scale: 1.0,
        })
    }

    pub fn with_input_scale(mut self, scale: f64) -> Self {
        self.input_scale = scale;
        self
    }

    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &DMatrix<f64> {
        &self.w2
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.w2.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> DVector<f64> {
        self.w1.tr_mul(&DVector::from_column_slice(x)) * self.input_scale
    }

    /// Pre-softmax outputs `W2ᵀ W1ᵀ (s·x)`.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.w2.tr_mul(&self.hidden(x)).iter().copied().collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let z = self.logits(x)?;
        Ok(argmax(&z))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.output_dim() {
            return Err(Error::OutOfRange(format!(
                "label {label} with {} classes",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, batch: &[LabeledExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidDimension("empty batch".into()));
        }
        let mut total = 0.0;
        for ex in batch {
            self.check_label(ex.label)?;
            let z = self.logits(&ex.probs)?;
            let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + z.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
            total += lse - z[ex.label];
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean cross-entropy and its gradient over `batch`.
    pub fn loss_and_grad(&self, batch: &[LabeledExample]) -> Result<(f64, Gradient)> {
        let loss = self.loss(batch)?;
        let mut g1 = DMatrix::zeros(self.input_dim(), self.hidden_dim());
        let mut g2 = DMatrix::zeros(self.hidden_dim(), self.output_dim());
        for ex in batch {
            let h = self.hidden(&ex.probs);
            let mut dz = DVector::from_vec(softmax(self.w2.tr_mul(&h).as_slice()));
            dz[ex.label] -= 1.0;
            g2.ger(1.0, &h, &dz, 1.0);
            let dh = &self.w2 * &dz;
            let x = DVector::from_column_slice(&ex.probs);
            g1.ger(self.input_scale, &x, &dh, 1.0);
        }
        let n = batch.len() as f64;
        Ok((loss, Gradient { w1: g1 / n, w2: g2 / n }))
    }

    fn descend(&mut self, g: &Gradient, lr: f64) {
        self.w1 -= &g.w1 * lr;
        self.w2 -= &g.w2 * lr;
    }
}

fn argmax(z: &[f64]) -> usize {
    z.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Fixed factor applied to every input; `None` uses `√input`, which brings
    /// a spread-out probability vector to roughly unit norm.
    pub input_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 10,
            epochs: 15,
            lr: 0.05,
            batch: 32,
            seed: 3,
            input_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(model: &ReadoutModel, data: &[LabeledExample]) -> Result<Metrics> {
    let k = model.output_dim();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    for ex in data {
        model.check_label(ex.label)?;
        let p = model.predict(&ex.probs)?;
        confusion[ex.label][p] += 1;
        correct += usize::from(p == ex.label);
    }
    Ok(Metrics {
        accuracy: correct as f64 / data.len().max(1) as f64,
        loss: model.loss(data)?,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss after each epoch, with the initial loss first.
    pub epoch_loss: Vec<f64>,
    pub train: Metrics,
}

/// Trains in place with shuffled mini-batches.
pub fn train_model(model: &mut ReadoutModel, data: &[LabeledExample], cfg: &TrainConfig) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::InvalidDimension("no training data".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = vec![model.loss(data)?];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<LabeledExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (_, g) = model.loss_and_grad(&batch)?;
            model.descend(&g, cfg.lr);
        }
        epoch_loss.push(model.loss(data)?);
    }
    Ok(TrainHistory {
        epoch_loss,
        train: evaluate(model, data)?,
    })
}

/// Fresh model from `cfg`, sized from the data, then trained.
pub fn train(data: &[LabeledExample], classes: usize, cfg: &TrainConfig) -> Result<(ReadoutModel, TrainHistory)> {
    let input = data
        .first()
        .map(|e| e.probs.len())
        .ok_or_else(|| Error::InvalidDimension("no training data".into()))?;
    let scale = cfg.input_scale.unwrap_or((input as f64).sqrt());
    let mut model = ReadoutModel::random(input, cfg.hidden, classes, cfg.seed).with_input_scale(scale);
    let history = train_model(&mut model, data, cfg)?;
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub input_scale: f64,
    /// Row-major `input × hidden`.
    pub w1: Vec<f64>,
    /// Row-major `hidden × output`.
    pub w2: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&ReadoutModel> for Checkpoint {
    fn from(m: &ReadoutModel) -> Self {
        Self {
            input: m.input_dim(),
            hidden: m.hidden_dim(),
            output: m.output_dim(),
            input_scale: m.input_scale,
            w1: row_major(&m.w1),
            w2: row_major(&m.w2),
        }
    }
}

impl TryFrom<Checkpoint> for ReadoutModel {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        if c.w1.len() != c.input * c.hidden || c.w2.len() != c.hidden * c.output {
            return Err(Error::Data("checkpoint weight sizes do not match its dimensions".into()));
        }
        let w1 = DMatrix::from_row_slice(c.input, c.hidden, &c.w1);
        let w2 = DMatrix::from_row_slice(c.hidden, c.output, &c.w2);
        Ok(ReadoutModel::from_weights(w1, w2)?.with_input_scale(c.input_scale))
    }
}

pub fn save_checkpoint(model: &ReadoutModel, path: &Path) -> Result<()> {
    write_json(path, &Checkpoint::from(model))
}

pub fn load_checkpoint(path: &Path) -> Result<ReadoutModel> {
    let c: Checkpoint = serde_json::from_str(&read_to_string(path)?)?;
    c.try_into()
}

/// `label,p0,p1,...` with one example per line.
pub fn features_to_csv(data: &[LabeledExample]) -> String {
    let width = data.first().map_or(0, |e| e.probs.len());
    let mut out = String::from("label");
    for k in 0..width {
        out.push_str(&format!(",p{k}"));
    }
    out.push('\n');
    for ex in data {
        out.push_str(&ex.label.to_string());
        for p in &ex.probs {
            out.push(',');
            out.push_str(&format!("{p:e}"));
        }
        out.push('\n');
    }
    out
}

pub fn features_from_csv(text: &str) -> Result<Vec<LabeledExample>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Data("empty feature file".into()))?;
    let width = header.split(',').count() - 1;
    lines
        .enumerate()
        .map(|(row, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width + 1 {
                return Err(Error::Data(format!(
                    "feature row {} has {} fields, expected {}",
                    row + 1,
                    fields.len(),
                    width + 1
                )));
            }
            let bad = |f: &str| Error::Data(format!("feature row {}: cannot parse '{f}'", row + 1));
            let label = fields[0].trim().parse().map_err(|_| bad(fields[0]))?;
            let probs = fields[1..]
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<_>>>()?;
            LabeledExample::new(probs, label)
        })
        .collect()
}

pub fn write_features(path: &Path, data: &[LabeledExample]) -> Result<()> {
    write_atomic(path, features_to_csv(data).as_bytes())
}

pub fn read_features(path: &Path) -> Result<Vec<LabeledExample>> {
    features_from_csv(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    // clusters around the three vertices of the 2-simplex
    fn toy_clusters(n: usize, seed: u64) -> Vec<LabeledExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 3;
                let noise = simplex_point(&mut rng, 3);
                let probs: Vec<f64> = (0..3)
                    .map(|k| 0.8 * f64::from(u8::from(k == label)) + 0.2 * noise[k])
                    .collect();
                LabeledExample::new(probs, label).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let m = ReadoutModel::zeros(5, 4, 3);
        for p in m.forward(&[0.2; 5]).unwrap() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(m.forward(&[0.2; 4]).is_err());
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[0.3, -1.0, 2.0]);
        let b = softmax(&[10.3, 9.0, 12.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(a.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(a.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn predict_is_argmax_of_forward() {
        let m = ReadoutModel::random(6, 4, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = simplex_point(&mut rng, 6);
            assert_eq!(m.predict(&x).unwrap(), argmax(&m.forward(&x).unwrap()));
        }
    }

    #[test]
    fn logits_are_linear() {
        let m = ReadoutModel::random(7, 5, 3, 4).with_input_scale(2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = simplex_point(&mut rng, 7);
        let y = simplex_point(&mut rng, 7);
        let (a, b) = (0.7, -1.3);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let (fx, fy, fm) = (m.logits(&x).unwrap(), m.logits(&y).unwrap(), m.logits(&mix).unwrap());
        for k in 0..3 {
            assert_abs_diff_eq!(fm[k], a * fx[k] + b * fy[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn paper_sized_parameter_count() {
        assert_eq!(ReadoutModel::zeros(165, 10, 3).parameter_count(), 1680);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ReadoutModel::random(6, 4, 3, 8).with_input_scale(3.0);
        let batch: Vec<LabeledExample> = (0..5)
            .map(|i| LabeledExample::new(simplex_point(&mut rng, 6), i % 3).unwrap())
            .collect();
        let (_, g) = m.loss_and_grad(&batch).unwrap();
        let h = 1e-6;
        for (which, grad) in [(0, &g.w1), (1, &g.w2)] {
            for idx in 0..grad.len() {
                let mut plus = m.clone();
                let mut minus = m.clone();
                if which == 0 {
                    plus.w1[idx] += h;
                    minus.w1[idx] -= h;
                } else {
                    plus.w2[idx] += h;
                    minus.w2[idx] -= h;
                }
                let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(fd, grad[idx], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let data = toy_clusters(30, 1);
        let cfg = TrainConfig {
            lr: 0.0,
            hidden: 4,
            ..TrainConfig::default()
        };
        let mut m = ReadoutModel::random(3, 4, 3, 0);
        let before = m.clone();
        train_model(&mut m, &data, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn separable_clusters_are_learned() {
        let data = toy_clusters(300, 2);
        let cfg = TrainConfig {
            hidden: 4,
            epochs: 50,
            lr: 0.05,
            ..TrainConfig::default()
        };
        let (model, history) = train(&data, 3, &cfg).unwrap();
        assert!(history.train.accuracy >= 0.99, "accuracy {}", history.train.accuracy);
        assert_eq!(model.parameter_count(), 3 * 4 + 4 * 3);
        let small = TrainConfig {
            lr: 0.005,
            ..cfg
        };
        let (_, slow) = train(&data, 3, &small).unwrap();
        for w in slow.epoch_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "loss rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_clusters(60, 3);
        let cfg = TrainConfig {
            hidden: 4,
            ..TrainConfig::default()
        };
        assert_eq!(train(&data, 3, &cfg).unwrap(), train(&data, 3, &cfg).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = ReadoutModel::random(5, 3, 2, 1).with_input_scale(5.0);
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
    }

    #[test]
    fn feature_csv_round_trip() {
        let data = toy_clusters(7, 4);
        let back = features_from_csv(&features_to_csv(&data)).unwrap();
        assert_eq!(back, data);
        assert!(features_from_csv("label,p0,p1\n0,0.5\n").is_err());
        assert!(features_from_csv("label,p0,p1\n0,0.5,0.2\n").is_err());
        assert!(features_from_csv("label,p0\nx,1\n").is_err());
    }
}
