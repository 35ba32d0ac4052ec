//! Atemporal phasor networks: projection encoders, dense phasor layers,
//! manual backpropagation and training.

mod forward;
mod io;
mod projection;
mod train;

pub use forward::{
    backward, backward_batch, forward_atemporal, forward_batch, forward_phases, layer_forward_batch,
    BatchTrace, ForwardMode, Gradients, LayerTrace, Trace,
};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT};
pub use projection::{
    fit_norm_moments, nrp_project, project_batch, project_batch_train, rpp_project, Moments, ProjectionKind,
    ProjectionSpec, NRP_QUANTILE, STD_FLOOR,
};
pub use train::{
    evaluate_atemporal, train, AtemporalEvaluation, EpochMetrics, OptimizerKind, TrainConfig,
};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One fully-connected phasor layer. There is no bias term.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim × in_dim`, row `j` holds neuron `j`'s input weights.
    pub weights: Array2<f64>,
    /// Probability of dropping each output unit during training.
    pub dropout_rate: f64,
}

impl DenseLayerSpec {
    pub fn neuron_weights(&self, j: usize) -> &[f64] {
        let all = self.weights.as_slice().expect("weights are stored row-major");
        &all[j * self.in_dim..(j + 1) * self.in_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub projection: ProjectionSpec,
    pub layers: Vec<DenseLayerSpec>,
    pub n_classes: usize,
    pub meta: Map<String, Value>,
}

impl Model {
    pub fn input_dim(&self) -> usize {
        self.projection.dimension
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.out_dim)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.projection.validate()?;
        if self.layers.is_empty() {
            return Err(Error::DimensionChain("model has no dense layers".into()));
        }
        let mut prev = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim != prev {
                return Err(Error::DimensionChain(format!(
                    "layer {i} expects {} inputs but receives {prev}",
                    layer.in_dim
                )));
            }
            if layer.weights.dim() != (layer.out_dim, layer.in_dim) {
                return Err(Error::DimensionChain(format!(
                    "layer {i} weights are {:?}, expected ({}, {})",
                    layer.weights.dim(),
                    layer.out_dim,
                    layer.in_dim
                )));
            }
            if !(0.0..1.0).contains(&layer.dropout_rate) {
                return Err(Error::InvalidArchitecture(format!("layer {i} dropout outside [0, 1)")));
            }
            if layer.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidArchitecture(format!("layer {i} has non-finite weights")));
            }
            prev = layer.out_dim;
        }
        if prev != self.n_classes {
            return Err(Error::DimensionChain(format!(
                "final layer has {prev} outputs for {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }
}

/// Layer sizes and input encoder for [`init_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    /// Input dimension followed by each dense layer's width; the last entry
    /// is the class count.
    pub dims: Vec<usize>,
    pub projection: ProjectionKind,
    /// Fraction of non-zero entries in the NRP matrix.
    pub nrp_density: f64,
}

impl Architecture {
    pub fn new(dims: &[usize], projection: ProjectionKind) -> Self {
        Architecture { dims: dims.to_vec(), projection, nrp_density: 1.0 }
    }

    /// 784 → 100 → 10 with an NRP encoder.
    pub fn mnist_mlp() -> Self {
        Self::new(&[784, 100, 10], ProjectionKind::Nrp)
    }
}

/// Glorot-uniform weights and a seeded projection.
pub fn init_model(arch: &Architecture, seed: u64) -> Result<Model> {
    if arch.dims.len() < 2 {
        return Err(Error::InvalidArchitecture("need an input and at least one layer".into()));
    }
    if let Some(i) = arch.dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidArchitecture(format!("dimension {i} is zero")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection = ProjectionSpec::generate(arch.projection, arch.dims[0], seed, arch.nrp_density)?;
    let layers = arch
        .dims
        .windows(2)
        .map(|pair| {
            let (n_in, n_out) = (pair[0], pair[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((n_out, n_in), || rng.random_range(-limit..=limit));
            DenseLayerSpec { in_dim: n_in, out_dim: n_out, weights, dropout_rate: 0.0 }
        })
        .collect();
    let mut meta = Map::new();
    meta.insert("init_seed".into(), Value::from(seed));
    let model = Model { projection, layers, n_classes: *arch.dims.last().unwrap(), meta };
    model.validate()?;
    Ok(model)
}
