use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::forward::{backward_batch, forward_batch, ForwardMode};
use super::projection::{project_batch, project_batch_train};
use super::Model;
use crate::data::ImageDataset;
use crate::error::{Error, Result};
use crate::phasor::{predict_class, TARGET_PHASE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Output dropout of every hidden layer.
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            dropout_rate: 0.25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig("dropout rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training-mode predictions seen during the epoch.
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtemporalEvaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[label][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub predictions: Vec<usize>,
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

fn images_to_array(data: &ImageDataset, indices: &[usize]) -> Array2<f64> {
    let n = data.n_pixels;
    let mut out = Array2::zeros((indices.len(), n));
    for (mut row, &i) in out.rows_mut().into_iter().zip(indices) {
        row.iter_mut().zip(data.image(i)).for_each(|(d, &s)| *d = s as f64);
    }
    out
}

fn targets_for(data: &ImageDataset, indices: &[usize], n_classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((indices.len(), n_classes));
    for (r, &i) in indices.iter().enumerate() {
        t[[r, data.label(i)]] = TARGET_PHASE;
    }
    t
}

/// Mini-batch training of the mean cosine loss.
///
/// Hidden layers get `config.dropout_rate` output dropout. NRP moments are
/// fitted on the fly. Returns the trained model and per-epoch metrics; test
/// accuracy is filled when `test` is given.
pub fn train(
    model: &Model,
    dataset: &ImageDataset,
    config: &TrainConfig,
    test: Option<&ImageDataset>,
) -> Result<(Model, Vec<EpochMetrics>)> {
    config.validate()?;
    model.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if dataset.n_pixels != model.input_dim() || dataset.n_classes != model.n_classes {
        return Err(Error::InvalidConfig(format!(
            "dataset {}x{} classes does not fit model {}x{} classes",
            dataset.n_pixels,
            dataset.n_classes,
            model.input_dim(),
            model.n_classes
        )));
    }
    let mut model = model.clone();
    let n_layers = model.layers.len();
    for layer in &mut model.layers[..n_layers - 1] {
        layer.dropout_rate = config.dropout_rate;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam {
        m: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
        v: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
        t: 0,
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            // a single-sample batch has no usable statistics for normalization
            if chunk.len() < 2 && dataset.len() >= 2 {
                continue;
            }
            let imgs = images_to_array(dataset, chunk);
            let phases = project_batch_train(&mut model.projection, imgs.view())?;
            let trace = forward_batch(&model, phases, ForwardMode::Train(&mut rng))?;
            let targets = targets_for(dataset, chunk, model.n_classes);
            let grads = backward_batch(&model, &trace, targets.view())?;

            let out = trace.output().expect("layers");
            for (row, &i) in out.rows().into_iter().zip(chunk) {
                if predict_class(row.as_slice().expect("contiguous"))? == dataset.label(i) {
                    correct += 1;
                }
            }
            seen += chunk.len();
            loss_sum += grads.loss;
            batches += 1;
            apply_update(&mut model, &grads.layers, config, &mut adam);
        }
        let test_acc = match test {
            Some(t) if !t.is_empty() => Some(evaluate_atemporal(&model, t, None)?.accuracy),
            _ => None,
        };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            test_acc,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} train_acc {:.4} test_acc {:?}",
            m.train_loss,
            m.train_acc,
            m.test_acc
        );
        history.push(m);
    }

    model.meta.insert("dataset".into(), Value::from(dataset.name.clone()));
    model.meta.insert("train_config".into(), serde_json::to_value(config)?);
    if let Some(last) = history.last() {
        model.meta.insert("final_train_loss".into(), Value::from(last.train_loss));
        if let Some(acc) = last.test_acc {
            model.meta.insert("test_accuracy".into(), Value::from(acc));
        }
    }
    Ok((model, history))
}

fn apply_update(model: &mut Model, grads: &[Array2<f64>], config: &TrainConfig, adam: &mut Adam) {
    let lr = config.learning_rate;
    match config.optimizer {
        OptimizerKind::Sgd => {
            for (layer, g) in model.layers.iter_mut().zip(grads) {
                layer.weights.scaled_add(-lr, g);
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let bc1 = 1.0 - beta1.powi(adam.t);
            let bc2 = 1.0 - beta2.powi(adam.t);
            for ((layer, g), (m, v)) in model.layers.iter_mut().zip(grads).zip(adam.m.iter_mut().zip(adam.v.iter_mut())) {
                ndarray::Zip::from(&mut layer.weights).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
            }
        }
    }
}

/// Eval-mode predictions for every sample (or the first `limit`).
pub fn evaluate_atemporal(model: &Model, dataset: &ImageDataset, limit: Option<usize>) -> Result<AtemporalEvaluation> {
    let total = limit.map_or(dataset.len(), |l| l.min(dataset.len()));
    if total == 0 {
        return Err(Error::Empty("empty evaluation set"));
    }
    let mut confusion = vec![vec![0u64; model.n_classes]; dataset.n_classes.max(model.n_classes)];
    let mut predictions = Vec::with_capacity(total);
    let mut correct = 0;
    let indices: Vec<usize> = (0..total).collect();
    for chunk in indices.chunks(512) {
        let imgs = images_to_array(dataset, chunk);
        let phases = project_batch(&model.projection, imgs.view())?;
        let trace = forward_batch(model, phases, ForwardMode::Eval)?;
        for (row, &i) in trace.output().expect("layers").rows().into_iter().zip(chunk) {
            let pred = predict_class(row.as_slice().expect("contiguous"))?;
            let label = dataset.label(i);
            confusion[label][pred] += 1;
            correct += usize::from(pred == label);
            predictions.push(pred);
        }
    }
    Ok(AtemporalEvaluation { accuracy: correct as f64 / total as f64, correct, total, confusion, predictions })
}
