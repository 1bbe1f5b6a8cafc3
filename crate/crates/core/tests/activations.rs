mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use qtnn::activations::{
    qt_activation, qt_activation_derivative, qt_transmission, relu, relu_derivative, softmax, ActivationMode,
    ActivationSpec,
};
use qtnn::rng;

use common::transfer_matrix_transmission;

#[test]
fn closed_form_agrees_with_transfer_matrix() {
    for &(v0, a) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 0.4), (10.0, 0.25)] {
        for i in 0..50 {
            let e = v0 * (0.05 + 4.95 * i as f64 / 49.0);
            let oracle = transfer_matrix_transmission(e, &[(v0, a)]);
            let t = qt_transmission(e, v0, a);
            assert!((t - oracle).abs() < 1e-8, "E={e} V0={v0} a={a}: {t} vs {oracle}");
        }
    }
}

#[test]
fn reference_points() {
    assert_eq!(qt_transmission(0.0, 1.0, 1.0), 0.0);
    assert_eq!(qt_transmission(-3.0, 1.0, 1.0), 0.0);
    assert_relative_eq!(qt_transmission(1.0, 1.0, 2.0), 0.5, epsilon = 1e-15);
    let oracle = transfer_matrix_transmission(0.5, &[(1.0, 1.0)]);
    assert!((qt_transmission(0.5, 1.0, 1.0) - oracle).abs() < 1e-12);
    assert!(qt_transmission(1e6, 1.0, 1.0) > 0.999_999);
}

#[test]
fn activation_examples() {
    let spec = ActivationSpec::qt(1.0, 1.0, 1.0);
    let mut r = rng::stream(0, "test");
    assert_eq!(qt_activation(-0.4, &spec, &mut r).unwrap(), 0.0);
    let oracle = transfer_matrix_transmission(0.7, &[(1.0, 1.0)]);
    assert!((qt_activation(0.7, &spec, &mut r).unwrap() - oracle).abs() < 1e-12);
    // the barrier top maps to 0.5 when V0·a² = 4
    let top = ActivationSpec::qt(1.0, 2.0, 1.0);
    assert_relative_eq!(qt_activation(1.0, &top, &mut r).unwrap(), 0.5, epsilon = 1e-15);
    let g = 2.5;
    let spec2 = ActivationSpec::qt(1.5, 2.0 / 1.5f64.sqrt(), g);
    assert_relative_eq!(qt_activation(1.5 / g, &spec2, &mut r).unwrap(), 0.5, epsilon = 1e-14);
    assert!(qt_activation(0.2, &ActivationSpec::relu(), &mut r).is_err());
}

#[test]
fn derivative_matches_central_differences_on_both_branches() {
    let spec = ActivationSpec::qt(1.0, 1.0, 1.0);
    let h = 1e-6;
    let fd = |v: f64| (spec.expected(v + h) - spec.expected(v - h)) / (2.0 * h);
    let samples = (0..100)
        .map(|i| 0.02 + 0.96 * i as f64 / 99.0)
        .chain((0..100).map(|i| 1.02 + 3.98 * i as f64 / 99.0));
    for v in samples {
        let d = qt_activation_derivative(v, &spec).unwrap();
        assert!((d - fd(v)).abs() / d.abs().max(1.0) < 1e-5, "v={v}: {d} vs {}", fd(v));
    }
    assert_eq!(qt_activation_derivative(-0.3, &spec).unwrap(), 0.0);
}

#[test]
fn relu_pair() {
    assert_eq!((relu(-2.0), relu_derivative(-2.0)), (0.0, 0.0));
    assert_eq!((relu(3.0), relu_derivative(3.0)), (3.0, 1.0));
    assert_eq!((relu(0.0), relu_derivative(0.0)), (0.0, 0.0));
}

#[test]
fn stochastic_mode_is_an_unbiased_bernoulli_draw() {
    let spec = ActivationSpec::qt(1.0, 1.0, 1.0).with_mode(ActivationMode::Stochastic);
    let mut r = rng::stream(11, rng::STOCHASTIC_ACTIVATION);
    for &v in &[0.3, 0.8, 2.2] {
        let p = qt_transmission(v, 1.0, 1.0);
        let n = 100_000;
        let mut hits = 0u32;
        for _ in 0..n {
            let s = qt_activation(v, &spec, &mut r).unwrap();
            assert!(s == 0.0 || s == 1.0);
            hits += s as u32;
        }
        let mean = f64::from(hits) / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((mean - p).abs() < 3.0 * sigma, "v={v}: {mean} vs {p} ± {sigma}");
    }
}

#[test]
fn softmax_examples() {
    let y = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
    for (a, b) in y.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
        assert_relative_eq!(*a, b, epsilon = 1e-15);
    }
    let u = softmax(&[4.2; 7]).unwrap();
    assert!(u.iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
    assert!(softmax(&[1.0, f64::NAN]).is_err());
    assert!(softmax(&[1.0, f64::INFINITY]).is_err());
}

proptest! {
    #[test]
    fn transmission_is_a_probability_and_monotone_below_the_top(
        v0 in 0.05f64..20.0, a in 0.05f64..5.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        let (t1, t2) = (qt_transmission(lo * v0, v0, a), qt_transmission(hi * v0, v0, a));
        prop_assert!((0.0..=1.0).contains(&t1) && (0.0..=1.0).contains(&t2));
        prop_assert!(t1 <= t2 + 1e-15);
    }

    #[test]
    fn transmission_above_the_top_stays_in_range(v0 in 0.05f64..20.0, a in 0.05f64..5.0, f in 1.0f64..50.0) {
        let t = qt_transmission(f * v0, v0, a);
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        v in proptest::collection::vec(-1000.0f64..1000.0, 1..16), c in -500.0f64..500.0,
    ) {
        let y = softmax(&v).unwrap();
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(y.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let z = softmax(&shifted).unwrap();
        for (a, b) in y.iter().zip(z.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
