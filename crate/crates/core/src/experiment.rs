//! Dataset-level temporal evaluation and perturbation sweeps.

use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::ImageDataset;
use crate::error::{Error, Result};
use crate::network::Model;
use crate::temporal::{simulate_network, NetworkRun, Perturbation, RFParams, SimOptions};

/// Independent stream for item `index` of a run seeded with `seed`; equal for
/// serial and parallel schedules.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

pub fn image_f64(dataset: &ImageDataset, i: usize) -> Vec<f64> {
    dataset.image(i).iter().map(|&v| f64::from(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalEvaluation {
    pub accuracy: f64,
    pub atemporal_accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Images whose output layer never fired.
    pub silent: usize,
    /// Images where temporal and atemporal predictions agree.
    pub agreement: f64,
    /// Per output cycle: mean over images of the output-layer phase MSE.
    pub output_cycle_mse: Vec<Option<f64>>,
    /// Per dense layer: mean over images of the last-cycle phase MSE.
    pub layer_mse: Vec<Option<f64>>,
    pub synops_total: u64,
    pub synops_per_image: f64,
    pub predictions: Vec<Option<usize>>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs the first `limit` images (all when `None`) temporally. Image `i`
/// draws its perturbation noise from `derive_seed(seed, i)`.
pub fn evaluate_temporal(
    model: &Model,
    dataset: &ImageDataset,
    params: &RFParams,
    perturbation: Perturbation,
    seed: u64,
    limit: Option<usize>,
) -> Result<TemporalEvaluation> {
    params.validate()?;
    let n = limit.map_or(dataset.len(), |l| l.min(dataset.len()));
    if n == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    let runs: Vec<NetworkRun> = (0..n)
        .into_par_iter()
        .map(|i| {
            let opts = SimOptions { perturbation, seed: derive_seed(seed, i as u64), record_voltage: false };
            simulate_network(model, &image_f64(dataset, i), params, &opts)
        })
        .collect::<Result<_>>()?;

    let correct = runs.iter().enumerate().filter(|(i, r)| r.prediction == Some(dataset.label(*i))).count();
    let atemporal_correct = runs.iter().enumerate().filter(|(i, r)| r.atemporal_prediction == dataset.label(*i)).count();
    let agree = runs.iter().filter(|r| r.prediction == Some(r.atemporal_prediction)).count();
    let n_layers = model.layers.len();
    let n_cycles = runs[0].trace.phase_mse[n_layers - 1].len();
    let output_cycle_mse =
        (0..n_cycles).map(|k| mean_of(runs.iter().map(|r| r.trace.phase_mse[n_layers - 1][k]))).collect();
    let layer_mse = (0..n_layers)
        .map(|l| mean_of(runs.iter().map(|r| r.trace.phase_mse[l].last().copied().flatten())))
        .collect();
    let synops_total: u64 = runs.iter().map(|r| r.synops.total).sum();
    Ok(TemporalEvaluation {
        accuracy: correct as f64 / n as f64,
        atemporal_accuracy: atemporal_correct as f64 / n as f64,
        correct,
        total: n,
        silent: runs.iter().filter(|r| r.is_silent()).count(),
        agreement: agree as f64 / n as f64,
        output_cycle_mse,
        layer_mse,
        synops_total,
        synops_per_image: synops_total as f64 / n as f64,
        predictions: runs.iter().map(|r| r.prediction).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Dropout,
    Jitter,
    Steps,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Dropout => "dropout",
            SweepParam::Jitter => "jitter",
            SweepParam::Steps => "steps",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropout" => Ok(SweepParam::Dropout),
            "jitter" => Ok(SweepParam::Jitter),
            "steps" => Ok(SweepParam::Steps),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// One sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub param: String,
    pub value: f64,
    pub accuracy: f64,
    /// `accuracy` over the unperturbed temporal accuracy of the same model.
    pub relative_accuracy: f64,
    /// Last-cycle phase MSE per dense layer.
    pub layer_mse: Vec<Option<f64>>,
    pub synops: u64,
    pub wall_seconds: f64,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "param,value,accuracy,relative_accuracy,layer_mse,synops,wall_seconds";

    /// CSV row; per-layer MSEs are `;`-separated, `nan` marks a silent layer.
    pub fn csv_row(&self) -> String {
        let mse: Vec<String> =
            self.layer_mse.iter().map(|m| m.map_or_else(|| "nan".to_string(), |v| format!("{v:.6e}"))).collect();
        format!(
            "{},{},{:.6},{:.6},{},{},{:.3}",
            self.param,
            self.value,
            self.accuracy,
            self.relative_accuracy,
            mse.join(";"),
            self.synops,
            self.wall_seconds
        )
    }
}

pub struct SweepSpec<'a> {
    pub model: &'a Model,
    pub dataset: &'a ImageDataset,
    pub params: RFParams,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub include_input: bool,
    pub seed: u64,
    pub limit: Option<usize>,
}

fn point_config(spec: &SweepSpec<'_>, value: f64) -> Result<(RFParams, Perturbation)> {
    let mut params = spec.params;
    let mut perturbation = Perturbation { include_input: spec.include_input, ..Perturbation::default() };
    match spec.param {
        SweepParam::Dropout if (0.0..=1.0).contains(&value) => perturbation.dropout = value,
        SweepParam::Jitter if value >= 0.0 && value.is_finite() => perturbation.jitter = value,
        SweepParam::Steps if value >= 8.0 && value.fract() == 0.0 => params.steps_per_cycle = value as usize,
        p => return Err(Error::InvalidConfig(format!("invalid {} value {value}", p.as_str()))),
    }
    params.validate()?;
    Ok((params, perturbation))
}

/// Evaluates every grid point. Point `k` uses the stream
/// `derive_seed(seed, k + 1)`; the unperturbed baseline uses stream 0, so a
/// zero perturbation reproduces it exactly.
pub fn run_sweep(spec: &SweepSpec<'_>) -> Result<Vec<MetricsRecord>> {
    let baseline =
        evaluate_temporal(spec.model, spec.dataset, &spec.params, Perturbation::default(), spec.seed, spec.limit)?;
    let mut records = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let (params, perturbation) = point_config(spec, value)?;
        let start = Instant::now();
        let eval = evaluate_temporal(spec.model, spec.dataset, &params, perturbation, spec.seed, spec.limit)?;
        records.push(MetricsRecord {
            param: spec.param.as_str().to_string(),
            value,
            accuracy: eval.accuracy,
            relative_accuracy: if baseline.accuracy > 0.0 { eval.accuracy / baseline.accuracy } else { f64::NAN },
            layer_mse: eval.layer_mse,
            synops: eval.synops_total,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}
