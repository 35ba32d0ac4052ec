//! Phase ↔ spike-time conversion and spike-train containers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Orientation, RFParams};
use crate::error::{Error, Result};
use crate::phasor::wrap_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub neuron: usize,
    pub t: f64,
}

/// Time-sorted spike events of one population.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub events: Vec<Spike>,
    pub n_neurons: usize,
    pub horizon: f64,
}

impl SpikeTrain {
    pub fn new(n_neurons: usize, horizon: f64) -> Self {
        SpikeTrain { events: Vec::new(), n_neurons, horizon }
    }

    /// Builds a train from unsorted events; times are clamped to `[0, horizon]`.
    pub fn from_events(n_neurons: usize, horizon: f64, mut events: Vec<Spike>) -> Result<Self> {
        if let Some(s) = events.iter().find(|s| s.neuron >= n_neurons) {
            return Err(Error::InvalidConfig(format!("spike from neuron {} of {n_neurons}", s.neuron)));
        }
        for s in &mut events {
            s.t = s.t.clamp(0.0, horizon);
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.neuron.cmp(&b.neuron)));
        Ok(SpikeTrain { events, n_neurons, horizon })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t <= w[1].t)
    }

    pub fn spikes_per_neuron(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_neurons];
        for s in &self.events {
            counts[s.neuron] += 1;
        }
        counts
    }

    /// Appends rows `layer,neuron,t` (9 decimals) to a CSV stream.
    pub fn write_csv_rows<W: Write>(&self, layer: usize, out: &mut W) -> std::io::Result<()> {
        for s in &self.events {
            writeln!(out, "{layer},{},{:.9}", s.neuron, s.t)?;
        }
        Ok(())
    }
}

/// One spike per neuron per cycle at `t = kT + T(x+1)/2`.
pub fn encode_phases(phases: &[f64], params: &RFParams, n_cycles: usize) -> SpikeTrain {
    let period = params.period;
    let mut events = Vec::with_capacity(phases.len() * n_cycles);
    for k in 0..n_cycles {
        let base = k as f64 * period;
        for (j, &x) in phases.iter().enumerate() {
            events.push(Spike { neuron: j, t: base + period * (x.clamp(-1.0, 1.0) + 1.0) / 2.0 });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.neuron.cmp(&b.neuron)));
    SpikeTrain { events, n_neurons: phases.len(), horizon: n_cycles as f64 * period }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedCycle {
    pub cycle: usize,
    /// Decoded phase per neuron; 0 where missing.
    pub phases: Vec<f64>,
    pub missing: Vec<bool>,
}

impl DecodedCycle {
    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// Decodes cycle `cycle` of a population `depth` layers downstream of the
/// input encoder. The window is shifted by the accumulated `depth·layer_delay`
/// integration lag, and the latest spike in the window wins.
pub fn decode_spikes(train: &SpikeTrain, params: &RFParams, depth: usize, cycle: usize) -> DecodedCycle {
    let period = params.period;
    let start = cycle as f64 * period + depth as f64 * params.layer_delay();
    let end = start + period;
    let mut phases = vec![0.0; train.n_neurons];
    let mut missing = vec![true; train.n_neurons];
    for s in train.events.iter().filter(|s| s.t >= start && s.t < end) {
        let raw = wrap_unchecked(2.0 * (s.t - start) / period - 1.0);
        phases[s.neuron] = match params.orientation {
            Orientation::Forward => raw,
            Orientation::Mirrored => wrap_unchecked(-raw),
        };
        missing[s.neuron] = false;
    }
    DecodedCycle { cycle, phases, missing }
}

/// Index of the last cycle whose delayed window ends inside the horizon.
pub fn last_full_cycle(params: &RFParams, depth: usize) -> Option<usize> {
    let span = params.horizon() - depth as f64 * params.layer_delay();
    let full = (span / params.period + 1e-9).floor();
    if full < 1.0 {
        None
    } else {
        Some(full as usize - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::circular_error;

    #[test]
    fn encode_examples() {
        let p = RFParams::default();
        assert_eq!(encode_phases(&[0.0], &p, 1).events[0].t, 0.5);
        assert_eq!(encode_phases(&[-1.0], &p, 1).events[0].t, 0.0);
        let train = encode_phases(&[0.5], &p, 3);
        assert_eq!(train.events[2].t, 2.75);
        assert_eq!(train.len(), 3);
        assert!(train.is_sorted());
    }

    #[test]
    fn decode_examples() {
        let p = RFParams { leakage: 0.0, ..RFParams::default() };
        let train = SpikeTrain::from_events(1, 2.0, vec![Spike { neuron: 0, t: 0.75 }]).unwrap();
        let d = decode_spikes(&train, &p, 1, 0);
        assert!(!d.missing[0]);
        assert!(d.phases[0].abs() < 1e-15);
        let d = decode_spikes(&train, &p, 1, 1);
        assert!(d.missing[0]);
    }

    #[test]
    fn latest_spike_wins() {
        let p = RFParams::default();
        let train = SpikeTrain::from_events(
            1,
            1.0,
            vec![Spike { neuron: 0, t: 0.2 }, Spike { neuron: 0, t: 0.6 }],
        )
        .unwrap();
        assert!((decode_spikes(&train, &p, 0, 0).phases[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn mirrored_orientation_negates() {
        let p = RFParams { orientation: Orientation::Mirrored, ..RFParams::default() };
        let train = encode_phases(&[0.3], &p, 1);
        assert!((decode_spikes(&train, &p, 0, 0).phases[0] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn round_trip_all_cycles() {
        let p = RFParams::default();
        let phases: Vec<f64> = (0..64).map(|i| -1.0 + 2.0 * i as f64 / 64.0).collect();
        let train = encode_phases(&phases, &p, 4);
        for k in 0..4 {
            let d = decode_spikes(&train, &p, 0, k);
            for (a, b) in d.phases.iter().zip(&phases) {
                assert!(circular_error(*a, *b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn last_full_cycle_accounts_for_delay() {
        let p = RFParams::default();
        assert_eq!(last_full_cycle(&p, 0), Some(9));
        assert_eq!(last_full_cycle(&p, 1), Some(8));
        assert_eq!(last_full_cycle(&p, 4), Some(8));
        assert_eq!(last_full_cycle(&p, 5), Some(7));
        let short = RFParams { n_cycles: 1, ..p };
        assert_eq!(last_full_cycle(&short, 1), None);
    }

    #[test]
    fn csv_rows() {
        let train = encode_phases(&[0.0, 0.5], &RFParams::default(), 1);
        let mut buf = Vec::new();
        train.write_csv_rows(2, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,0,0.500000000\n2,1,0.750000000\n");
    }
}
