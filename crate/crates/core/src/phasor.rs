//! Phase arithmetic and the phasor neuron.
//!
//! Phases are real numbers normalized by π, so the whole circle is `[-1, 1)`
//! and a phase `x` stands for the unit phasor `e^{iπx}`. A neuron takes a
//! weighted complex sum of its input phasors and emits the angle of the
//! result.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// Complex potential / superposition value.
pub type ComplexState = Complex64;

/// Below this squared magnitude a superposition is treated as degenerate and
/// its phase gradient is defined to be zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Target phase of the correct output neuron (a quarter turn).
pub const TARGET_PHASE: f64 = 0.5;

/// A phase angle normalized by π.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Phase(f64);

impl Phase {
    /// Wraps `value` into `[-1, 1)`.
    pub fn new(value: f64) -> Result<Self> {
        wrap_phase(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 * PI
    }

    pub fn phasor(self) -> ComplexState {
        Complex64::from_polar(1.0, self.radians())
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

#[inline]
pub(crate) fn wrap_unchecked(p: f64) -> f64 {
    if (-1.0..1.0).contains(&p) {
        return p;
    }
    let r = (p + 1.0).rem_euclid(2.0);
    // rem_euclid can round up to exactly 2.0 for tiny negative inputs
    if r >= 2.0 {
        -1.0
    } else {
        r - 1.0
    }
}

/// Shifts `p` by multiples of 2 into the half-open interval `[-1, 1)`.
pub fn wrap_phase(p: f64) -> Result<Phase> {
    if !p.is_finite() {
        return Err(Error::NonFinitePhase(p));
    }
    Ok(Phase(wrap_unchecked(p)))
}

/// Signed shortest difference `a - b` around the circle, in `[-1, 1)`.
#[inline]
pub fn circular_error(a: f64, b: f64) -> f64 {
    wrap_unchecked(a - b)
}

/// Weighted complex sum `Σ wⱼ·e^{iπxⱼ}`.
pub fn superpose(x: &[f64], w: &[f64]) -> Result<ComplexState> {
    if x.is_empty() {
        return Err(Error::Empty("phase vector"));
    }
    check_len(x.len(), w.len())?;
    Ok(superpose_unchecked(x, w))
}

#[inline]
pub(crate) fn superpose_unchecked(x: &[f64], w: &[f64]) -> ComplexState {
    let (mut re, mut im) = (0.0, 0.0);
    for (&xi, &wi) in x.iter().zip(w) {
        let (s, c) = (PI * xi).sin_cos();
        re += wi * c;
        im += wi * s;
    }
    Complex64::new(re, im)
}

/// Angle of `s` normalized by π. The zero vector maps to phase 0.
pub fn phase_of(s: ComplexState) -> f64 {
    if s.re == 0.0 && s.im == 0.0 {
        return 0.0;
    }
    s.im.atan2(s.re) / PI
}

/// The phasor neuron: phase of the weighted superposition of input phasors.
pub fn phasor_activate(x: &[f64], w: &[f64]) -> Result<f64> {
    superpose(x, w).map(phase_of)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGrad {
    pub d_x: Vec<f64>,
    pub d_w: Vec<f64>,
    /// Set when `|S|² < DEGENERATE_EPS`; both gradients are then zero.
    pub degenerate: bool,
}

/// Analytic partial derivatives of `phasor_activate` with respect to the
/// input phases and the weights.
///
/// With `S = a + ib` and `θⱼ = πxⱼ`:
/// `∂y/∂xⱼ = wⱼ(a·cosθⱼ + b·sinθⱼ)/|S|²` and
/// `∂y/∂wⱼ = (a·sinθⱼ − b·cosθⱼ)/(π|S|²)`.
pub fn activation_grad(x: &[f64], w: &[f64]) -> Result<ActivationGrad> {
    let s = superpose(x, w)?;
    let norm = s.norm_sqr();
    let n = x.len();
    if norm < DEGENERATE_EPS {
        return Ok(ActivationGrad { d_x: vec![0.0; n], d_w: vec![0.0; n], degenerate: true });
    }
    let (a, b) = (s.re, s.im);
    let mut d_x = Vec::with_capacity(n);
    let mut d_w = Vec::with_capacity(n);
    for (&xi, &wi) in x.iter().zip(w) {
        let (sn, cs) = (PI * xi).sin_cos();
        d_x.push(wi * (a * cs + b * sn) / norm);
        d_w.push((a * sn - b * cs) / (PI * norm));
    }
    Ok(ActivationGrad { d_x, d_w, degenerate: false })
}

/// Quadrature one-hot target: 0.5 at `class`, 0 elsewhere.
pub fn encode_target(class: usize, n_classes: usize) -> Result<Vec<f64>> {
    if class >= n_classes {
        return Err(Error::ClassOutOfRange { class, n_classes });
    }
    let mut t = vec![0.0; n_classes];
    t[class] = TARGET_PHASE;
    Ok(t)
}

/// Mean of `1 − cos(π(yₖ − ŷₖ))` over elements.
pub fn cosine_loss(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    check_len(target.len(), predicted.len())?;
    let sum: f64 = target
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| 1.0 - (PI * (y - p)).cos())
        .sum();
    Ok(sum / target.len() as f64)
}

/// Gradient of [`cosine_loss`] with respect to the prediction.
pub fn cosine_loss_grad(target: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    if target.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    check_len(target.len(), predicted.len())?;
    let scale = PI / target.len() as f64;
    Ok(target
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| -scale * (PI * (y - p)).sin())
        .collect())
}

/// Index of the output whose phase is circularly closest to the target 0.5.
/// Ties go to the lowest index.
pub fn predict_class(output: &[f64]) -> Result<usize> {
    if output.is_empty() {
        return Err(Error::Empty("output phases"));
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, &y) in output.iter().enumerate() {
        let d = circular_error(y, TARGET_PHASE).abs();
        if d < best_dist {
            best = k;
            best_dist = d;
        }
    }
    Ok(best)
}
