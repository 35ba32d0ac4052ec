use std::f64::consts::PI;

use ndarray::Array2;
use phasornet::network::{nrp_project, rpp_project, ProjectionKind, ProjectionSpec};
use phasornet::phasor::{
    circular_error, cosine_loss, phasor_activate, predict_class, superpose, wrap_phase,
};
use phasornet::temporal::{decode_spikes, encode_phases, RFParams};
use proptest::prelude::*;

fn phases(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=16).prop_flat_map(|n| (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-2.0f64..2.0, n)))
}

/// Direct complex sum, independent of the library's superposition.
fn oracle_angle(x: &[f64], w: &[f64]) -> Option<f64> {
    let (re, im) = x.iter().zip(w).fold((0.0, 0.0), |(r, i), (&xi, &wi)| {
        (r + wi * (PI * xi).cos(), i + wi * (PI * xi).sin())
    });
    (re.hypot(im) > 1e-6).then(|| im.atan2(re) / PI)
}

proptest! {
    #[test]
    fn activation_in_range_and_matches_oracle((x, w) in inputs()) {
        let y = phasor_activate(&x, &w).unwrap();
        prop_assert!((-1.0..=1.0).contains(&y));
        if let Some(o) = oracle_angle(&x, &w) {
            prop_assert!(circular_error(y, o).abs() < 1e-9);
        }
    }

    #[test]
    fn activation_is_scale_invariant((x, w) in inputs(), k in 1e-3f64..1e3) {
        prop_assume!(superpose(&x, &w).unwrap().norm() > 1e-6);
        let scaled: Vec<f64> = w.iter().map(|v| v * k).collect();
        let a = phasor_activate(&x, &w).unwrap();
        let b = phasor_activate(&x, &scaled).unwrap();
        prop_assert!(circular_error(a, b).abs() < 1e-9);
    }

    #[test]
    fn activation_is_two_periodic((x, w) in inputs(), idx in any::<prop::sample::Index>(), k in -3i32..=3) {
        prop_assume!(superpose(&x, &w).unwrap().norm() > 1e-6);
        let mut shifted = x.clone();
        let i = idx.index(x.len());
        shifted[i] += 2.0 * f64::from(k);
        let a = phasor_activate(&x, &w).unwrap();
        let b = phasor_activate(&shifted, &w).unwrap();
        prop_assert!(circular_error(a, b).abs() < 1e-9);
    }

    #[test]
    fn loss_is_bounded_and_zero_on_target(y in phases(1..=12), p in phases(1..=12)) {
        let n = y.len().min(p.len());
        let l = cosine_loss(&y[..n], &p[..n]).unwrap();
        prop_assert!((0.0..=2.0).contains(&l));
        prop_assert!(cosine_loss(&y[..n], &y[..n]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn prediction_ignores_whole_turns(y in phases(1..=12), k in -2i32..=2) {
        let shifted: Vec<f64> = y.iter().map(|v| wrap_phase(v + 2.0 * f64::from(k)).unwrap().value()).collect();
        prop_assert_eq!(predict_class(&y).unwrap(), predict_class(&shifted).unwrap());
    }

    #[test]
    fn wrap_is_idempotent_and_in_range(p in -1e6f64..1e6) {
        let once = wrap_phase(p).unwrap().value();
        prop_assert!((-1.0..1.0).contains(&once));
        prop_assert_eq!(wrap_phase(once).unwrap().value(), once);
        prop_assert!(((p - once) / 2.0 - ((p - once) / 2.0).round()).abs() < 1e-6);
    }

    #[test]
    fn codec_round_trip(x in phases(1..=64), cycles in 1usize..5) {
        let params = RFParams::default();
        let train = encode_phases(&x, &params, cycles);
        prop_assert_eq!(train.len(), x.len() * cycles);
        prop_assert!(train.is_sorted());
        for k in 0..cycles {
            let d = decode_spikes(&train, &params, 0, k);
            for (a, b) in d.phases.iter().zip(&x) {
                prop_assert!(circular_error(*a, *b).abs() <= 2.0 * params.dt() / params.period);
            }
        }
    }

    #[test]
    fn nrp_output_is_clipped(img in prop::collection::vec(0.0f64..=1.0, 9), seed in any::<u64>()) {
        let spec = ProjectionSpec::generate(ProjectionKind::Nrp, 9, seed, 1.0).unwrap();
        prop_assert!(nrp_project(&img, &spec).unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn rpp_preserves_magnitude(img in prop::collection::vec(0.0f64..=1.0, 12), seed in any::<u64>()) {
        let spec = ProjectionSpec::generate(ProjectionKind::Rpp, 12, seed, 1.0).unwrap();
        let out = rpp_project(&img, &spec).unwrap();
        for (a, b) in out.iter().zip(&img) {
            prop_assert_eq!(a.abs(), *b);
        }
    }
}

#[test]
fn nrp_batch_matches_single() {
    let spec = ProjectionSpec::generate(ProjectionKind::Nrp, 6, 4, 1.0).unwrap();
    let img = [0.0, 0.2, 0.9, 1.0, 0.4, 0.5];
    let single = nrp_project(&img, &spec).unwrap();
    let batch = phasornet::network::project_batch(&spec, Array2::from_shape_vec((1, 6), img.to_vec()).unwrap().view())
        .unwrap();
    for (a, b) in single.iter().zip(batch.row(0)) {
        assert!((a - b).abs() < 1e-15);
    }
}
