//! Oracles and fixtures shared by the integration tests. Each oracle takes a
//! different computational route from the library code it checks.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use qtnn::data::Dataset;
use qtnn::network::Network;

// ---------------------------------------------------------------------------
// 1D transfer matrix

/// Transmission probability of a plane wave with energy `e` through a
/// piecewise-constant potential, units `2m/ħ² = 1`. `layers` lists
/// `(potential, width)` between two zero-potential half spaces.
///
/// In each region `ψ = A e^{iqx} + B e^{−iqx}` with `q = √(E − V)` (imaginary
/// below the potential). Matching `ψ` and `ψ'` at every interface maps the
/// outgoing-only amplitude on the right back to the left.
pub fn transfer_matrix_transmission(e: f64, layers: &[(f64, f64)]) -> f64 {
    let q_of = |v: f64| Complex64::new(e - v, 0.0).sqrt();
    let basis = |q: Complex64, x: f64| {
        let ep = (Complex64::i() * q * x).exp();
        let em = (-Complex64::i() * q * x).exp();
        [[ep, em], [Complex64::i() * q * ep, -Complex64::i() * q * em]]
    };
    let solve2 = |m: [[Complex64; 2]; 2], r: [Complex64; 2]| {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (r[0] * m[1][1] - m[0][1] * r[1]) / det,
            (m[0][0] * r[1] - r[0] * m[1][0]) / det,
        ]
    };
    let apply =
        |m: [[Complex64; 2]; 2], c: [Complex64; 2]| [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]];

    // interfaces and region wavenumbers, left to right
    let mut bounds = vec![0.0];
    let mut qs = vec![q_of(0.0)];
    for &(v, w) in layers {
        bounds.push(bounds.last().unwrap() + w);
        qs.push(q_of(v));
    }
    qs.push(q_of(0.0));

    let mut coeff = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    for j in (0..bounds.len()).rev() {
        let x = bounds[j];
        let values = apply(basis(qs[j + 1], x), coeff);
        coeff = solve2(basis(qs[j], x), values);
    }
    1.0 / coeff[0].norm_sqr()
}

// ---------------------------------------------------------------------------
// DFT

/// Magnitude of the 2D DFT by direct summation, zero frequency moved to
/// `(rows/2, cols/2)`.
pub fn brute_dft_magnitude(w: &Array2<f64>) -> Array2<f64> {
    let (r, c) = w.dim();
    let mut out = Array2::zeros((r, c));
    for u in 0..r {
        for v in 0..c {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..r {
                for y in 0..c {
                    let phase = -2.0 * std::f64::consts::PI * ((u * x) as f64 / r as f64 + (v * y) as f64 / c as f64);
                    acc += w[[x, y]] * Complex64::from_polar(1.0, phase);
                }
            }
            out[[(u + r / 2) % r, (v + c / 2) % c]] = acc.norm();
        }
    }
    out
}

// ---------------------------------------------------------------------------
// gradients

/// Recomputes the forward pass of `net` from scratch (deterministic
/// activation) and returns `(v1, h, v2)`.
pub fn manual_forward(net: &Network, x: &Array1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let spec = net.config().activation;
    let v1 = net.w1().dot(x);
    let h = v1.mapv(|v| spec.expected(v));
    let v2 = net.w2().dot(&h);
    (v1, h, v2)
}

/// `−∂loss/∂W` for both layers by central differences of step `h`.
pub fn descent_direction_fd<F>(net: &Network, loss: F, h: f64) -> (Array2<f64>, Array2<f64>)
where
    F: Fn(&Network) -> f64,
{
    let mut probe = net.clone();
    let mut g1 = Array2::zeros(net.w1().dim());
    for ((i, j), g) in g1.indexed_iter_mut() {
        let w = net.w1()[[i, j]];
        probe.w1_mut()[[i, j]] = w + h;
        let up = loss(&probe);
        probe.w1_mut()[[i, j]] = w - h;
        let down = loss(&probe);
        probe.w1_mut()[[i, j]] = w;
        *g = -(up - down) / (2.0 * h);
    }
    let mut g2 = Array2::zeros(net.w2().dim());
    for ((i, j), g) in g2.indexed_iter_mut() {
        let w = net.w2()[[i, j]];
        probe.w2_mut()[[i, j]] = w + h;
        let up = loss(&probe);
        probe.w2_mut()[[i, j]] = w - h;
        let down = loss(&probe);
        probe.w2_mut()[[i, j]] = w;
        *g = -(up - down) / (2.0 * h);
    }
    (g1, g2)
}

/// Largest `|a − b| / max(|a|, |b|)` over matching entries, skipping pairs
/// that are both below `floor` in magnitude.
pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .filter(|(x, y)| x.abs().max(y.abs()) >= floor)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// simulator

/// Indices of local maxima of `profile` that reach `min_fraction` of its
/// largest value and dominate a window of `±half_window` samples. Plateaus
/// count once.
pub fn significant_maxima(profile: &[f64], min_fraction: f64, half_window: usize) -> Vec<usize> {
    let peak = profile.iter().cloned().fold(0.0, f64::max);
    let mut found: Vec<usize> = Vec::new();
    for i in 0..profile.len() {
        let lo = i.saturating_sub(half_window);
        let hi = (i + half_window + 1).min(profile.len());
        let local = profile[lo..hi].iter().cloned().fold(f64::MIN, f64::max);
        if profile[i] >= min_fraction * peak && profile[i] == local {
            if found.last().is_some_and(|&j| i - j <= half_window) {
                continue;
            }
            found.push(i);
        }
    }
    found
}

// ---------------------------------------------------------------------------
// fixtures

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn fixture_paths(split: &str) -> (PathBuf, PathBuf) {
    let d = fixture_dir();
    (
        d.join(format!("subset-{split}-images-idx3-ubyte.gz")),
        d.join(format!("subset-{split}-labels-idx1-ubyte.gz")),
    )
}

/// The 1,000-image Fashion MNIST subset: 500 train, 500 test, 50 of each
/// category in each split.
pub fn fixture(split: &str) -> Dataset {
    let (images, labels) = fixture_paths(split);
    Dataset::load(&images, &labels, 10).expect("fixture loads")
}
