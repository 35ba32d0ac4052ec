use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::SpikeTrain;
use crate::network::Model;

/// Removes each event independently with probability `p`.
pub fn drop_spikes(train: &SpikeTrain, p: f64, rng: &mut dyn RngCore) -> SpikeTrain {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return train.clone();
    }
    let events = train.events.iter().copied().filter(|_| rng.random::<f64>() >= p).collect();
    SpikeTrain { events, n_neurons: train.n_neurons, horizon: train.horizon }
}

/// Shifts each event by zero-mean Gaussian noise with standard deviation
/// `sigma · period`, clamps to `[0, horizon]` and re-sorts.
pub fn jitter_spikes(train: &SpikeTrain, sigma: f64, period: f64, rng: &mut dyn RngCore) -> SpikeTrain {
    if sigma <= 0.0 {
        return train.clone();
    }
    let noise = Normal::new(0.0, sigma * period).expect("positive std");
    let mut events = train.events.clone();
    for s in &mut events {
        s.t = (s.t + noise.sample(rng)).clamp(0.0, train.horizon);
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.neuron.cmp(&b.neuron)));
    SpikeTrain { events, n_neurons: train.n_neurons, horizon: train.horizon }
}

/// Perturbations applied to spike trains passed between layers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub dropout: f64,
    /// Jitter standard deviation as a fraction of the period.
    pub jitter: f64,
    /// Also perturb the encoded input train.
    pub include_input: bool,
}

impl Perturbation {
    pub fn is_identity(&self) -> bool {
        self.dropout == 0.0 && self.jitter == 0.0
    }

    pub fn apply(&self, train: &SpikeTrain, period: f64, rng: &mut dyn RngCore) -> SpikeTrain {
        if self.is_identity() {
            return train.clone();
        }
        let dropped = drop_spikes(train, self.dropout, rng);
        jitter_spikes(&dropped, self.jitter, period, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SynopCount {
    /// Spikes × fan-out for each population, input encoder first.
    pub per_layer: Vec<u64>,
    pub total: u64,
}

/// Synaptic operations: every spike counts once per downstream neuron.
/// `trains[0]` is the encoded input, `trains[ℓ]` the output of dense layer
/// `ℓ−1`; the output layer has no fan-out.
pub fn count_synops(trains: &[SpikeTrain], model: &Model) -> SynopCount {
    let per_layer: Vec<u64> = trains
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let fanout = model.layers.get(i).map_or(0, |l| l.out_dim) as u64;
            t.len() as u64 * fanout
        })
        .collect();
    let total = per_layer.iter().sum();
    SynopCount { per_layer, total }
}
