//! Single resonate-and-fire neurons: exact integration, spike injection and
//! peak detection.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::RFParams;
use crate::error::{check_len, Result};
use crate::phasor::ComplexState;

/// `e^z − 1` without cancellation for small `|z|`.
pub(crate) fn cexpm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let em1 = z.re.exp_m1();
    // cos(y) − 1 = −2 sin²(y/2)
    let half = (z.im / 2.0).sin();
    Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

/// `∫_a^b e^{λ(t₁−τ)} dτ`: response at `t₁` to a unit current on `[a, b]`.
pub fn box_integral(lambda: Complex64, a: f64, b: f64, t1: f64) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    (lambda * (t1 - b)).exp() * cexpm1(lambda * (b - a)) / lambda
}

/// A rectangular current pulse on one neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCurrent {
    pub start: f64,
    pub end: f64,
    pub height: f64,
    /// Integration has accounted for the pulse up to this time.
    pub applied_until: f64,
}

/// Complex potentials of a group of neurons plus their pending input pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct RFState {
    pub t: f64,
    pub z: Vec<ComplexState>,
    pub last_spike: Vec<Option<f64>>,
    pub boxes: Vec<Vec<BoxCurrent>>,
}

impl RFState {
    pub fn new(n: usize) -> Self {
        Self::starting_at(n, 0.0)
    }

    pub fn starting_at(n: usize, t: f64) -> Self {
        RFState {
            t,
            z: vec![Complex64::new(0.0, 0.0); n],
            last_spike: vec![None; n],
            boxes: vec![Vec::new(); n],
        }
    }

    pub fn current(&self, i: usize) -> f64 {
        self.z[i].re
    }

    pub fn voltage(&self, i: usize) -> f64 {
        self.z[i].im
    }
}

/// Registers a spike of weight `w` at time `t` on `neuron` as a box current
/// of width `sT` centred on `t` and height `w/(sT)`, so it delivers charge `w`.
pub fn inject_spike(state: &mut RFState, neuron: usize, w: f64, t: f64, params: &RFParams) {
    let width = params.box_width * params.period;
    let start = t - width / 2.0;
    state.boxes[neuron].push(BoxCurrent { start, end: start + width, height: w / width, applied_until: start });
}

/// Advances every neuron by `dt`. The homogeneous part and the box pulses are
/// integrated exactly; `current` (empty for none) is an extra input held
/// constant over the step.
pub fn rf_step(state: &mut RFState, dt: f64, params: &RFParams, current: &[f64]) {
    let lambda = params.lambda();
    let t1 = state.t + dt;
    let decay = (lambda * dt).exp();
    let drive = cexpm1(lambda * dt) / lambda;
    for (i, z) in state.z.iter_mut().enumerate() {
        *z *= decay;
        if let Some(&c) = current.get(i) {
            *z += drive * c;
        }
        let boxes = &mut state.boxes[i];
        for b in boxes.iter_mut() {
            let lo = b.applied_until.max(b.start);
            let hi = b.end.min(t1);
            if hi > lo {
                *z += b.height * box_integral(lambda, lo, hi, t1);
                b.applied_until = hi;
            }
        }
        boxes.retain(|b| b.applied_until < b.end);
    }
    state.t = t1;
}

/// `Σ wᵢ·e^{−iπxᵢ}`: the potential after one lossless cycle of delta inputs.
pub fn impulse_closed_form(x: &[f64], w: &[f64]) -> Result<ComplexState> {
    check_len(x.len(), w.len())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (&xi, &wi) in x.iter().zip(w) {
        acc += wi * Complex64::from_polar(1.0, -PI * xi);
    }
    Ok(acc)
}

/// Online voltage-peak detector for one neuron.
///
/// Fires at a sample that is a strict rise from its predecessor and not
/// below its successor, lies above threshold (and zero), and comes more than
/// the refractory period after the previous spike. The spike time is refined
/// by a parabola through the three samples around the peak.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeakDetector {
    prev2: f64,
    prev1: f64,
    seen: u8,
    pub last_spike: Option<f64>,
}

impl PeakDetector {
    /// Feeds the sample taken at time `t`; returns a spike time if the
    /// previous sample was a peak.
    #[inline]
    pub fn push(&mut self, v: f64, t: f64, dt: f64, params: &RFParams) -> Option<f64> {
        let (v2, v1) = (self.prev2, self.prev1);
        self.prev2 = v1;
        self.prev1 = v;
        if self.seen < 2 {
            self.seen += 1;
            return None;
        }
        if !(v1 > v2 && v1 >= v && v1 > params.threshold && v1 > 0.0) {
            return None;
        }
        let curvature = v2 - 2.0 * v1 + v;
        let offset = if curvature < 0.0 { (0.5 * (v2 - v) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
        let tp = t - dt + offset * dt;
        if let Some(last) = self.last_spike {
            if tp - last <= params.refractory {
                return None;
            }
        }
        self.last_spike = Some(tp);
        Some(tp)
    }
}

/// Spike times of a sampled voltage trace `v[n] = V(t0 + n·dt)`.
pub fn detect_spikes(voltage: &[f64], t0: f64, dt: f64, params: &RFParams) -> Vec<f64> {
    let mut det = PeakDetector::default();
    voltage
        .iter()
        .enumerate()
        .filter_map(|(n, &v)| det.push(v, t0 + n as f64 * dt, dt, params))
        .collect()
}
