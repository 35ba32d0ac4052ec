use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, RngCore};

use super::projection::project_batch;
use super::{DenseLayerSpec, Model};
use crate::error::{check_len, Error, Result};
use crate::phasor::DEGENERATE_EPS;

pub enum ForwardMode<'a> {
    Eval,
    /// Applies each layer's output dropout with the given random stream.
    Train(&'a mut dyn RngCore),
}

/// Everything backpropagation needs from one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// `batch × in` input phases.
    pub input: Array2<f64>,
    /// `batch × in`, 1 for kept units and 0 for dropped ones.
    pub input_mask: Option<Array2<f64>>,
    /// Real and imaginary parts of each neuron's superposition, `batch × out`.
    pub re: Array2<f64>,
    pub im: Array2<f64>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchTrace {
    pub layers: Vec<LayerTrace>,
}

/// A single-sample trace is a batch of one.
pub type Trace = BatchTrace;

impl BatchTrace {
    pub fn output(&self) -> Option<&Array2<f64>> {
        self.layers.last().map(|l| &l.output)
    }

    /// Output phases of every layer for sample `i`.
    pub fn layer_outputs(&self, i: usize) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| l.output.row(i).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// One `out × in` matrix per dense layer.
    pub layers: Vec<Array2<f64>>,
    /// Mean cosine loss of the batch.
    pub loss: f64,
    /// Number of neuron evaluations whose superposition was degenerate.
    pub degenerate: usize,
}

fn masked_cos_sin(input: ArrayView2<f64>, mask: Option<&Array2<f64>>) -> (Array2<f64>, Array2<f64>) {
    let mut c = input.mapv(|x| (PI * x).cos());
    let mut s = input.mapv(|x| (PI * x).sin());
    if let Some(m) = mask {
        c *= m;
        s *= m;
    }
    (c, s)
}

#[inline]
fn angle(re: f64, im: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        0.0
    } else {
        im.atan2(re) / PI
    }
}

/// Phasor activation of a whole layer over a batch. Masked-out inputs are
/// removed from every superposition.
pub fn layer_forward_batch(
    layer: &DenseLayerSpec,
    input: ArrayView2<f64>,
    mask: Option<&Array2<f64>>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    check_len(layer.in_dim, input.ncols())?;
    let (c, s) = masked_cos_sin(input, mask);
    let re = c.dot(&layer.weights.t());
    let im = s.dot(&layer.weights.t());
    let mut out = Array2::zeros(re.raw_dim());
    Zip::from(&mut out).and(&re).and(&im).for_each(|o, &r, &i| *o = angle(r, i));
    Ok((re, im, out))
}

/// Runs the dense layers on already-projected phases (`batch × input_dim`).
pub fn forward_batch(model: &Model, phases: Array2<f64>, mut mode: ForwardMode<'_>) -> Result<BatchTrace> {
    check_len(model.input_dim(), phases.ncols())?;
    let mut layers = Vec::with_capacity(model.layers.len());
    let mut input = phases;
    let mut mask: Option<Array2<f64>> = None;
    for layer in &model.layers {
        let (re, im, output) = layer_forward_batch(layer, input.view(), mask.as_ref())?;
        let next_mask = match &mut mode {
            ForwardMode::Train(rng) if layer.dropout_rate > 0.0 => {
                let keep = 1.0 - layer.dropout_rate;
                Some(Array2::from_shape_simple_fn(output.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
            _ => None,
        };
        let next_input = output.clone();
        layers.push(LayerTrace { input, input_mask: mask, re, im, output });
        input = next_input;
        mask = next_mask;
    }
    Ok(BatchTrace { layers })
}

/// Forward pass from phases for a single sample.
pub fn forward_phases(model: &Model, phases: &[f64], mode: ForwardMode<'_>) -> Result<(Vec<f64>, Trace)> {
    let x = Array2::from_shape_vec((1, phases.len()), phases.to_vec()).expect("row");
    let trace = forward_batch(model, x, mode)?;
    let out = trace.output().expect("model has layers").row(0).to_vec();
    Ok((out, trace))
}

/// Projects one image with the frozen moments and runs the network.
pub fn forward_atemporal(model: &Model, img: &[f64], mode: ForwardMode<'_>) -> Result<(Vec<f64>, Trace)> {
    check_len(model.input_dim(), img.len())?;
    let x = Array2::from_shape_vec((1, img.len()), img.to_vec()).expect("row");
    let phases = project_batch(&model.projection, x.view())?;
    forward_phases(model, phases.row(0).as_slice().expect("contiguous"), mode)
}

/// Backpropagates the mean cosine loss against `targets` (`batch × classes`).
pub fn backward_batch(model: &Model, trace: &BatchTrace, targets: ArrayView2<f64>) -> Result<Gradients> {
    if trace.layers.len() != model.layers.len() {
        return Err(Error::InvalidConfig(format!(
            "trace has {} layers, model has {}",
            trace.layers.len(),
            model.layers.len()
        )));
    }
    let output = &trace.layers.last().expect("nonempty").output;
    if output.dim() != targets.dim() {
        return Err(Error::LengthMismatch { expected: output.len(), actual: targets.len() });
    }
    let n = output.len() as f64;
    let mut loss = 0.0;
    let mut grad_y = Array2::zeros(output.raw_dim());
    Zip::from(&mut grad_y).and(output).and(targets).for_each(|g, &y_hat, &y| {
        let d = PI * (y - y_hat);
        loss += 1.0 - d.cos();
        *g = -PI * d.sin() / n;
    });
    loss /= n;

    let mut degenerate = 0;
    let mut grads = vec![Array2::zeros((0, 0)); model.layers.len()];
    for (idx, (layer, lt)) in model.layers.iter().zip(&trace.layers).enumerate().rev() {
        let (c, s) = masked_cos_sin(lt.input.view(), lt.input_mask.as_ref());
        let mut ga = Array2::zeros(grad_y.raw_dim());
        let mut gb = Array2::zeros(grad_y.raw_dim());
        Zip::from(&mut ga).and(&mut gb).and(&grad_y).and(&lt.re).and(&lt.im).for_each(
            |ga, gb, &g, &re, &im| {
                let norm = re * re + im * im;
                if norm < DEGENERATE_EPS {
                    degenerate += 1;
                    return;
                }
                *ga = -g * im / (PI * norm);
                *gb = g * re / (PI * norm);
            },
        );
        grads[idx] = ga.t().dot(&c) + gb.t().dot(&s);
        if idx > 0 {
            let w = &layer.weights;
            grad_y = (gb.dot(w) * &c - ga.dot(w) * &s) * PI;
        }
    }
    Ok(Gradients { layers: grads, loss, degenerate })
}

/// Single-sample backward pass.
pub fn backward(model: &Model, trace: &Trace, target: &[f64]) -> Result<Gradients> {
    let t = Array2::from_shape_vec((1, target.len()), target.to_vec()).expect("row");
    backward_batch(model, trace, t.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_model, Architecture, ProjectionKind};
    use crate::phasor::{cosine_loss, phasor_activate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_phases(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_single_layer() {
        let mut m = init_model(&Architecture::new(&[1, 1], ProjectionKind::None), 0).unwrap();
        m.layers[0].weights[[0, 0]] = 1.0;
        let (out, _) = forward_phases(&m, &[0.3], ForwardMode::Eval).unwrap();
        assert!((out[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn layers_match_scalar_reference() {
        let m = init_model(&Architecture::new(&[784, 100, 10], ProjectionKind::None), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_phases(&mut rng, 784);
        let (out, trace) = forward_phases(&m, &x, ForwardMode::Eval).unwrap();
        let mut reference = x.clone();
        for (li, layer) in m.layers.iter().enumerate() {
            reference = (0..layer.out_dim)
                .map(|j| phasor_activate(&reference, layer.neuron_weights(j)).unwrap())
                .collect();
            for (a, b) in reference.iter().zip(trace.layers[li].output.row(0)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for (a, b) in reference.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_is_deterministic_and_zero_dropout_matches_eval() {
        let mut m = init_model(&Architecture::new(&[8, 6, 3], ProjectionKind::None), 5).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 / 8.0 - 0.5).collect();
        let (a, _) = forward_phases(&m, &x, ForwardMode::Eval).unwrap();
        let (b, _) = forward_phases(&m, &x, ForwardMode::Eval).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (c, _) = forward_phases(&m, &x, ForwardMode::Train(&mut rng)).unwrap();
        assert_eq!(a, c);
        m.layers[0].dropout_rate = 0.5;
        let (d, t) = forward_phases(&m, &x, ForwardMode::Train(&mut rng)).unwrap();
        assert!(t.layers[1].input_mask.is_some());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn dropped_units_do_not_contribute() {
        let mut m = init_model(&Architecture::new(&[4, 5, 2], ProjectionKind::None), 2).unwrap();
        m.layers[0].dropout_rate = 0.5;
        let x = [0.1, -0.4, 0.7, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, trace) = forward_phases(&m, &x, ForwardMode::Train(&mut rng)).unwrap();
        let mask = trace.layers[1].input_mask.as_ref().unwrap().row(0).to_vec();
        let hidden = trace.layers[0].output.row(0).to_vec();
        let kept: Vec<usize> = (0..5).filter(|&k| mask[k] == 1.0).collect();
        for j in 0..2 {
            let xs: Vec<f64> = kept.iter().map(|&k| hidden[k]).collect();
            let ws: Vec<f64> = kept.iter().map(|&k| m.layers[1].weights[[j, k]]).collect();
            let expected = if xs.is_empty() { 0.0 } else { phasor_activate(&xs, &ws).unwrap() };
            assert!((out[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_at_target() {
        let m = init_model(&Architecture::new(&[6, 4, 3], ProjectionKind::None), 1).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, -0.5, 0.6];
        let (out, trace) = forward_phases(&m, &x, ForwardMode::Eval).unwrap();
        let g = backward(&m, &trace, &out).unwrap();
        assert!(g.layers.iter().all(|l| l.iter().all(|&v| v.abs() < 1e-15)));
        assert_eq!(g.loss, 0.0);
    }

    #[test]
    fn loss_matches_scalar_loss() {
        let m = init_model(&Architecture::new(&[6, 4, 3], ProjectionKind::None), 1).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, -0.5, 0.6];
        let (out, trace) = forward_phases(&m, &x, ForwardMode::Eval).unwrap();
        let y = [0.5, 0.0, 0.0];
        let g = backward(&m, &trace, &y).unwrap();
        assert!((g.loss - cosine_loss(&y, &out).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_mismatched_trace() {
        let m = init_model(&Architecture::new(&[6, 4, 3], ProjectionKind::None), 1).unwrap();
        let err = backward(&m, &BatchTrace::default(), &[0.5, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
