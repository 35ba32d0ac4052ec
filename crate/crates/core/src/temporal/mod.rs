//! Spike-based execution of phasor networks with resonate-and-fire neurons.
//!
//! A phase `x ∈ [-1, 1)` is sent as one spike per cycle at `t = kT + T(x+1)/2`.
//! Each neuron's complex potential obeys `ż = λz + I(t)` with
//! `λ = −bT + i2π/T`; every incoming spike adds a box current of width `sT`
//! carrying a total charge equal to its synaptic weight. The neuron fires at
//! the peaks of its voltage `Im z`. Integrating the input over one cycle
//! rotates each contribution by the time remaining, so the voltage peak lands
//! a quarter period after the spike time that encodes the superposition's
//! phase.

mod codec;
mod neuron;
mod perturb;
mod sim;

pub use codec::{decode_spikes, encode_phases, last_full_cycle, DecodedCycle, Spike, SpikeTrain};
pub use neuron::{
    box_integral, detect_spikes, impulse_closed_form, inject_spike, rf_step, BoxCurrent, PeakDetector, RFState,
};
pub use perturb::{count_synops, drop_spikes, jitter_spikes, Perturbation, SynopCount};
pub use sim::{
    calibrate_orientation, pearson, simulate_layer, simulate_network, temporal_phase_mse, LayerRecord,
    NetworkRun, SimOptions, TemporalTrace,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction in which decoded spike times map back to phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Later spikes mean larger phases (the encoder's own convention).
    Forward,
    /// Decoded phases are negated.
    Mirrored,
}

/// Resonate-and-fire neuron and simulation-grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RFParams {
    /// Oscillation period `T` in seconds.
    pub period: f64,
    /// Leakage `b`; the potential decays as `e^{−bT·t}`.
    pub leakage: f64,
    /// Box kernel width as a fraction `s` of the period.
    pub box_width: f64,
    /// Voltage threshold for firing.
    pub threshold: f64,
    /// Minimum time between two spikes of one neuron, in seconds.
    pub refractory: f64,
    pub steps_per_cycle: usize,
    pub n_cycles: usize,
    pub orientation: Orientation,
}

impl Default for RFParams {
    fn default() -> Self {
        RFParams {
            period: 1.0,
            leakage: 0.2,
            box_width: 0.05,
            threshold: 0.03,
            refractory: 0.25,
            steps_per_cycle: 40,
            n_cycles: 10,
            orientation: Orientation::Forward,
        }
    }
}

impl RFParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad("period must be > 0");
        }
        if !(self.leakage >= 0.0 && self.leakage.is_finite()) {
            return bad("leakage must be >= 0");
        }
        if !(self.box_width > 0.0 && self.box_width < 1.0) {
            return bad("box width scale must lie in (0, 1)");
        }
        if !(self.refractory >= 0.0 && self.refractory.is_finite()) {
            return bad("refractory period must be >= 0");
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite");
        }
        if self.steps_per_cycle < 8 {
            return bad("steps per cycle must be >= 8");
        }
        if self.n_cycles == 0 {
            return bad("cycle count must be positive");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps_per_cycle as f64
    }

    pub fn horizon(&self) -> f64 {
        self.period * self.n_cycles as f64
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_cycle * self.n_cycles
    }

    /// `λ = −bT + i·2π/T`.
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(-self.leakage * self.period, 2.0 * PI / self.period)
    }

    /// Lag between a layer's input spike and its voltage peak: a quarter
    /// period, advanced by `atan(β/ω)/ω` because the leak `β = bT` moves the
    /// maximum of `e^{−βt}·sin(ωt)` earlier. Equals `T/4` when `b = 0`.
    pub fn layer_delay(&self) -> f64 {
        let omega = 2.0 * PI / self.period;
        let beta = self.leakage * self.period;
        self.period / 4.0 - (beta / omega).atan() / omega
    }
}
