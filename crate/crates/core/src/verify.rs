//! Self-contained property suites behind `phasornet verify`.
//!
//! Each suite uses synthetic inputs and an independent reference route
//! (finite differences, RK-free closed forms, sequential event integration).

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::network::{backward, forward_phases, init_model, Architecture, ForwardMode, Model, ProjectionKind};
use crate::phasor::{
    activation_grad, circular_error, cosine_loss, cosine_loss_grad, phasor_activate, superpose, ActivationGrad,
};
use crate::temporal::{
    decode_spikes, encode_phases, impulse_closed_form, inject_spike, last_full_cycle, rf_step, simulate_layer,
    RFParams, RFState,
};
use crate::Result;

pub const SUITES: [&str; 6] = ["gradients", "eq10", "codec", "integrator", "identity", "model-gradients"];

/// Step of the central finite differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Relative error with a floor on the denominator so that components that are
/// both ~0 compare on an absolute scale.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

pub fn random_phases(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Worst relative error of `grad` against central differences of the
/// activation over random instances with `|S| > 0.1`.
pub fn check_activation_grad(
    grad: impl Fn(&[f64], &[f64]) -> Result<ActivationGrad>,
    instances: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(1..=12);
        let x = random_phases(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if superpose(&x, &w)?.norm() <= 0.1 {
            continue;
        }
        let g = grad(&x, &w)?;
        for j in 0..n {
            let fd = |v: &mut Vec<f64>, which: bool| -> Result<f64> {
                let orig = v[j];
                v[j] = orig + FD_STEP;
                let plus = if which { phasor_activate(v, &w)? } else { phasor_activate(&x, v)? };
                v[j] = orig - FD_STEP;
                let minus = if which { phasor_activate(v, &w)? } else { phasor_activate(&x, v)? };
                v[j] = orig;
                Ok(circular_error(plus, minus) / (2.0 * FD_STEP))
            };
            let nx = fd(&mut x.clone(), true)?;
            let nw = fd(&mut w.clone(), false)?;
            worst = worst.max(rel_error(g.d_x[j], nx)).max(rel_error(g.d_w[j], nw));
        }
        done += 1;
    }
    Ok(worst)
}

pub fn check_loss_grad(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let y = random_phases(&mut rng, n);
        let mut p = random_phases(&mut rng, n);
        let g = cosine_loss_grad(&y, &p)?;
        for k in 0..n {
            let orig = p[k];
            p[k] = orig + FD_STEP;
            let plus = cosine_loss(&y, &p)?;
            p[k] = orig - FD_STEP;
            let minus = cosine_loss(&y, &p)?;
            p[k] = orig;
            worst = worst.max(rel_error(g[k], (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    Ok(worst)
}

fn model_loss(model: &Model, x: &[f64], y: &[f64]) -> Result<f64> {
    let (out, _) = forward_phases(model, x, ForwardMode::Eval)?;
    cosine_loss(y, &out)
}

/// Whole-network backpropagation against finite differences on every weight
/// of a small 6→4→3 model. Instances where any superposition has
/// `|S| ≤ 0.1` are skipped.
pub fn check_model_grad(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let mut model = init_model(&Architecture::new(&[6, 4, 3], ProjectionKind::None), rng.random())?;
        let x = random_phases(&mut rng, 6);
        let y = crate::phasor::encode_target(rng.random_range(0..3), 3)?;
        let (_, trace) = forward_phases(&model, &x, ForwardMode::Eval)?;
        let well_posed = trace
            .layers
            .iter()
            .all(|l| l.re.iter().zip(&l.im).all(|(r, i)| (r * r + i * i).sqrt() > 0.1));
        if !well_posed {
            continue;
        }
        let grads = backward(&model, &trace, &y)?;
        for li in 0..model.layers.len() {
            let (rows, cols) = model.layers[li].weights.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let orig = model.layers[li].weights[[r, c]];
                    model.layers[li].weights[[r, c]] = orig + FD_STEP;
                    let plus = model_loss(&model, &x, &y)?;
                    model.layers[li].weights[[r, c]] = orig - FD_STEP;
                    let minus = model_loss(&model, &x, &y)?;
                    model.layers[li].weights[[r, c]] = orig;
                    let numeric = (plus - minus) / (2.0 * FD_STEP);
                    worst = worst.max(rel_error(grads.layers[li][[r, c]], numeric));
                }
            }
        }
        done += 1;
    }
    Ok(worst)
}

/// Spike time of phase `x` within a lossless cycle `[0, T)`, shifting
/// negative phases by one period.
pub fn cycle_time(x: f64, period: f64) -> f64 {
    let shifted = if x < 0.0 { x + 2.0 } else { x };
    shifted * period / 2.0
}

/// Integrates true delta inputs over one lossless cycle event by event:
/// rotate between spikes, jump by `wᵢ` at each spike.
pub fn delta_cycle_response(x: &[f64], w: &[f64], period: f64) -> Complex64 {
    let omega = 2.0 * PI / period;
    let mut events: Vec<(f64, f64)> = x.iter().zip(w).map(|(&xi, &wi)| (cycle_time(xi, period), wi)).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut z = Complex64::new(0.0, 0.0);
    let mut t = 0.0;
    for (ti, wi) in events {
        z = z * Complex64::from_polar(1.0, omega * (ti - t)) + wi;
        t = ti;
    }
    z * Complex64::from_polar(1.0, omega * (period - t))
}

/// Integrates box-kernel inputs of width `s·T` with the neuron integrator
/// over one lossless cycle starting from rest.
pub fn box_cycle_response(x: &[f64], w: &[f64], box_width: f64) -> Complex64 {
    let params = RFParams { period: 2.0, leakage: 0.0, box_width, ..RFParams::default() };
    let mut state = RFState::new(1);
    for (&xi, &wi) in x.iter().zip(w) {
        inject_spike(&mut state, 0, wi, cycle_time(xi, params.period), &params);
    }
    for _ in 0..params.steps_per_cycle {
        rf_step(&mut state, params.dt(), &params, &[]);
    }
    state.z[0]
}

/// Max errors of the box route and the delta route against the closed form.
pub fn check_closed_form(instances: usize, box_width: f64, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_box, mut worst_delta): (f64, f64) = (0.0, 0.0);
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        // pulses must fit inside the integration window
        let x: Vec<f64> = (0..n)
            .map(|_| loop {
                let v: f64 = rng.random_range(-1.0..1.0);
                if v.abs() > box_width {
                    break v;
                }
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let closed = impulse_closed_form(&x, &w)?;
        worst_box = worst_box.max((box_cycle_response(&x, &w, box_width) - closed).norm());
        worst_delta = worst_delta.max((delta_cycle_response(&x, &w, 2.0) - closed).norm());
    }
    Ok((worst_box, worst_delta))
}

/// Largest wrapped decode error of an encode→decode round trip.
pub fn check_codec(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = RFParams::default();
    let x = random_phases(&mut rng, 500);
    let train = encode_phases(&x, &params, params.n_cycles);
    (0..params.n_cycles)
        .flat_map(|k| {
            let d = decode_spikes(&train, &params, 0, k);
            d.phases.iter().zip(&x).map(|(a, b)| circular_error(*a, *b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Relative errors of lossless rotation and pure decay after many steps.
pub fn check_integrator(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lossless = RFParams { leakage: 0.0, ..RFParams::default() };
    let leaky = RFParams::default();
    let (mut rot, mut dec): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let z0 = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let steps = rng.random_range(1..400usize);
        for (params, worst) in [(&lossless, &mut rot), (&leaky, &mut dec)] {
            let mut s = RFState::new(1);
            s.z[0] = z0;
            for _ in 0..steps {
                rf_step(&mut s, params.dt(), params, &[]);
            }
            let t = steps as f64 * params.dt();
            let expected = z0 * (params.lambda() * t).exp();
            *worst = worst.max((s.z[0] - expected).norm() / expected.norm());
        }
    }
    (rot, dec)
}

/// Worst wrapped error of a unit-weight neuron reproducing its input phase,
/// over 64 phases spanning the circle and every cycle from the third on.
pub fn check_identity(params: &RFParams) -> Result<f64> {
    let w = ndarray::Array2::from_elem((1, 1), 1.0);
    let last = last_full_cycle(params, 1).unwrap_or(0);
    let mut worst: f64 = 0.0;
    for k in 0..64 {
        let x = -1.0 + 2.0 * k as f64 / 64.0;
        let (out, _) = simulate_layer(&w, &encode_phases(&[x], params, params.n_cycles), params, false)?;
        for cycle in 3..=last {
            let d = decode_spikes(&out, params, 1, cycle);
            let err = if d.missing[0] { f64::INFINITY } else { circular_error(d.phases[0], x).abs() };
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SuiteReport {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteReport { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run_suite(name: &str) -> Option<SuiteReport> {
    let report = match name {
        "gradients" => timed("gradients", || {
            let act = check_activation_grad(activation_grad, 100, 1)?;
            let loss = check_loss_grad(100, 2)?;
            Ok((act < 1e-4 && loss < 1e-4, format!("activation max rel err {act:.2e}, loss {loss:.2e} (< 1e-4)")))
        }),
        "model-gradients" => timed("model-gradients", || {
            let worst = check_model_grad(20, 3)?;
            Ok((worst < 1e-3, format!("6-4-3 model max rel err {worst:.2e} (< 1e-3)")))
        }),
        "eq10" => timed("eq10", || {
            let (boxed, delta) = check_closed_form(50, 0.001, 4)?;
            Ok((
                boxed < 1e-3 && delta < 1e-12,
                format!("box s=0.001 max err {boxed:.2e} (< 1e-3), delta {delta:.2e} (< 1e-12)"),
            ))
        }),
        "codec" => timed("codec", || {
            let p = RFParams::default();
            let worst = check_codec(5);
            let tol = 2.0 * p.dt() / p.period;
            Ok((worst <= tol, format!("round-trip max err {worst:.2e} (<= {tol})")))
        }),
        "integrator" => timed("integrator", || {
            let (rot, dec) = check_integrator(6);
            Ok((rot < 1e-12 && dec < 1e-12, format!("rotation rel err {rot:.2e}, decay rel err {dec:.2e} (< 1e-12)")))
        }),
        "identity" => timed("identity", || {
            let worst = check_identity(&RFParams::default())?;
            Ok((worst <= 0.05, format!("single-neuron max wrapped err {worst:.4} (<= 0.05)")))
        }),
        _ => return None,
    };
    Some(report)
}
