//! Layer and network simulation on a shared time grid.
//!
//! Layers are feed-forward, so each one is simulated over the full horizon
//! from the complete spike train of the layer below. All layers use the same
//! grid; box pulses are integrated exactly over their overlap with each step,
//! so a pulse acts from its true onset rather than from the next grid point.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::codec::{decode_spikes, encode_phases, last_full_cycle, DecodedCycle, Spike, SpikeTrain};
use super::neuron::{box_integral, PeakDetector};
use super::perturb::{count_synops, Perturbation, SynopCount};
use super::{Orientation, RFParams};
use crate::error::{check_len, Result};
use crate::network::{forward_phases, project_batch, ForwardMode, Model};
use crate::phasor::{circular_error, predict_class, TARGET_PHASE};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LayerRecord {
    /// `V(t)` per neuron at every grid point, when requested.
    pub voltage: Option<Vec<Vec<f32>>>,
}

struct Pulse {
    source: usize,
    start: f64,
    end: f64,
    applied_until: f64,
}

/// Runs one layer of resonate-and-fire neurons (`weights` is `out × in`)
/// driven by `input`, and returns the spikes it emits.
pub fn simulate_layer(
    weights: &Array2<f64>,
    input: &SpikeTrain,
    params: &RFParams,
    record_voltage: bool,
) -> Result<(SpikeTrain, LayerRecord)> {
    params.validate()?;
    let (n_out, n_in) = weights.dim();
    check_len(n_in, input.n_neurons)?;
    let wt = weights.t().as_standard_layout().into_owned();
    let wt = wt.as_slice().expect("standard layout");

    let lambda = params.lambda();
    let dt = params.dt();
    let steps = params.total_steps();
    let width = params.box_width * params.period;
    let height = 1.0 / width;
    let decay = (lambda * dt).exp();

    let mut re = vec![0.0; n_out];
    let mut im = vec![0.0; n_out];
    let mut detectors = vec![PeakDetector::default(); n_out];
    let mut voltage: Option<Vec<Vec<f32>>> =
        record_voltage.then(|| (0..n_out).map(|_| Vec::with_capacity(steps + 1)).collect());
    let mut pulses: Vec<Pulse> = Vec::new();
    let mut next_event = 0;
    let mut out_events = Vec::new();

    for (i, det) in detectors.iter_mut().enumerate() {
        det.push(0.0, 0.0, dt, params);
        if let Some(v) = voltage.as_mut() {
            v[i].push(0.0);
        }
    }

    for n in 1..=steps {
        let t1 = n as f64 * dt;
        while next_event < input.events.len() && input.events[next_event].t - width / 2.0 < t1 {
            let s = input.events[next_event];
            let start = s.t - width / 2.0;
            pulses.push(Pulse { source: s.neuron, start, end: start + width, applied_until: start });
            next_event += 1;
        }

        for (r, i) in re.iter_mut().zip(im.iter_mut()) {
            let (nr, ni) = (*r * decay.re - *i * decay.im, *r * decay.im + *i * decay.re);
            *r = nr;
            *i = ni;
        }
        for p in &mut pulses {
            let lo = p.applied_until.max(p.start);
            let hi = p.end.min(t1);
            if hi <= lo {
                continue;
            }
            let c = box_integral(lambda, lo, hi, t1) * height;
            p.applied_until = hi;
            let col = &wt[p.source * n_out..(p.source + 1) * n_out];
            for ((r, i), &w) in re.iter_mut().zip(im.iter_mut()).zip(col) {
                *r += w * c.re;
                *i += w * c.im;
            }
        }
        pulses.retain(|p| p.applied_until < p.end);

        for (j, det) in detectors.iter_mut().enumerate() {
            if let Some(tp) = det.push(im[j], t1, dt, params) {
                out_events.push(Spike { neuron: j, t: tp });
            }
        }
        if let Some(v) = voltage.as_mut() {
            for (j, trace) in v.iter_mut().enumerate() {
                trace.push(im[j] as f32);
            }
        }
    }

    let train = SpikeTrain::from_events(n_out, input.horizon.max(params.horizon()), out_events)?;
    Ok((train, LayerRecord { voltage }))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    pub perturbation: Perturbation,
    /// Seed of the perturbation random stream.
    pub seed: u64,
    pub record_voltage: bool,
}

/// Everything observed during one temporal inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalTrace {
    /// Emitted spikes per population: encoded input first, then each layer.
    pub trains: Vec<SpikeTrain>,
    /// Atemporal phases per population, same indexing as `trains`.
    pub reference: Vec<Vec<f64>>,
    /// Decoded phases for every full cycle of every population.
    pub decoded: Vec<Vec<DecodedCycle>>,
    /// Per dense layer and cycle: mean squared circular phase error against
    /// the atemporal reference; `None` when every neuron was silent.
    pub phase_mse: Vec<Vec<Option<f64>>>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkRun {
    /// `None` when no output neuron ever fired.
    pub prediction: Option<usize>,
    /// Output phases used for the prediction (last full cycle, falling back
    /// to each neuron's latest earlier cycle).
    pub output_phases: Vec<Option<f64>>,
    pub atemporal_output: Vec<f64>,
    pub atemporal_prediction: usize,
    pub synops: SynopCount,
    pub trace: TemporalTrace,
}

impl NetworkRun {
    pub fn is_silent(&self) -> bool {
        self.prediction.is_none()
    }
}

/// Mean squared circular error of the non-missing neurons.
pub fn temporal_phase_mse(decoded: &DecodedCycle, reference: &[f64]) -> Option<f64> {
    let errs: Vec<f64> = decoded
        .phases
        .iter()
        .zip(&decoded.missing)
        .zip(reference)
        .filter(|((_, &missing), _)| !missing)
        .map(|((&p, _), &r)| circular_error(p, r).powi(2))
        .collect();
    if errs.is_empty() {
        None
    } else {
        Some(errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Projects `img`, encodes it as spikes and runs every layer temporally.
pub fn simulate_network(model: &Model, img: &[f64], params: &RFParams, opts: &SimOptions) -> Result<NetworkRun> {
    params.validate()?;
    check_len(model.input_dim(), img.len())?;
    let x = Array2::from_shape_vec((1, img.len()), img.to_vec()).expect("row");
    let phases = project_batch(&model.projection, x.view())?.row(0).to_vec();
    let (atemporal_output, atrace) = forward_phases(model, &phases, ForwardMode::Eval)?;
    let mut reference = vec![phases.clone()];
    reference.extend(atrace.layer_outputs(0));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let perturb = opts.perturbation;
    let input = encode_phases(&phases, params, params.n_cycles);
    let mut feed = if perturb.include_input { perturb.apply(&input, params.period, &mut rng) } else { input.clone() };
    let mut trains = vec![input];
    let mut layers = Vec::with_capacity(model.layers.len());
    for (li, layer) in model.layers.iter().enumerate() {
        let (out, record) = simulate_layer(&layer.weights, &feed, params, opts.record_voltage)?;
        if li + 1 < model.layers.len() {
            feed = perturb.apply(&out, params.period, &mut rng);
        }
        trains.push(out);
        layers.push(record);
    }

    let decoded: Vec<Vec<DecodedCycle>> = trains
        .iter()
        .enumerate()
        .map(|(depth, train)| match last_full_cycle(params, depth) {
            Some(last) => (0..=last).map(|k| decode_spikes(train, params, depth, k)).collect(),
            None => Vec::new(),
        })
        .collect();
    let phase_mse = decoded[1..]
        .iter()
        .zip(&reference[1..])
        .map(|(cycles, r)| cycles.iter().map(|d| temporal_phase_mse(d, r)).collect())
        .collect();

    let output_cycles = decoded.last().expect("output population");
    let n_out = model.n_classes;
    let output_phases: Vec<Option<f64>> = (0..n_out)
        .map(|j| output_cycles.iter().rev().find(|d| !d.missing[j]).map(|d| d.phases[j]))
        .collect();
    let prediction = output_phases
        .iter()
        .enumerate()
        .filter_map(|(j, p)| p.map(|p| (j, circular_error(p, TARGET_PHASE).abs())))
        .fold(None, |best: Option<(usize, f64)>, (j, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((j, d)),
        })
        .map(|(j, _)| j);

    let synops = count_synops(&trains, model);
    Ok(NetworkRun {
        prediction,
        output_phases,
        atemporal_prediction: predict_class(&atemporal_output)?,
        atemporal_output,
        synops,
        trace: TemporalTrace { trains, reference, decoded, phase_mse, layers },
    })
}

/// Pearson correlation coefficient; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Chooses the decode orientation that best correlates one simulated layer's
/// final-cycle output with its atemporal phases on random inputs. Returns the
/// winner and the correlation under each orientation.
pub fn calibrate_orientation(weights: &Array2<f64>, params: &RFParams, seed: u64) -> Result<(Orientation, f64, f64)> {
    use rand::Rng;
    use crate::phasor::phasor_activate;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = weights.ncols();
    let forward = RFParams { orientation: Orientation::Forward, ..*params };
    let last = last_full_cycle(&forward, 1).ok_or_else(|| {
        crate::error::Error::InvalidConfig("too few cycles to calibrate orientation".into())
    })?;
    let (mut dec, mut refs) = (Vec::new(), Vec::new());
    for _ in 0..4 {
        let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (out, _) = simulate_layer(weights, &encode_phases(&x, &forward, forward.n_cycles), &forward, false)?;
        let d = decode_spikes(&out, &forward, 1, last);
        for (j, row) in weights.rows().into_iter().enumerate() {
            if !d.missing[j] {
                dec.push(d.phases[j]);
                refs.push(phasor_activate(&x, row.as_slice().expect("row-major"))?);
            }
        }
    }
    let r_forward = pearson(&dec, &refs);
    let mirrored: Vec<f64> = dec.iter().map(|p| crate::phasor::wrap_unchecked(-p)).collect();
    let r_mirrored = pearson(&mirrored, &refs);
    let winner = if r_forward >= r_mirrored { Orientation::Forward } else { Orientation::Mirrored };
    Ok((winner, r_forward, r_mirrored))
}
