//! Quantum-tunnelling activation, its analytic derivative, the ReLU pair and
//! the softmax output map.
//!
//! The tunnelling activation is the transmission coefficient of a particle of
//! energy `E` through a rectangular barrier of height `V0` and thickness `a`,
//! in units where `2m/ħ² = 1`:
//!
//! ```text
//! 0 < E < V0:  T = [1 + V0² sinh²(κa) / (4E(V0 − E))]⁻¹,  κ = √(V0 − E)
//! E > V0:      T = [1 + V0² sin²(ka)  / (4E(E − V0))]⁻¹,  k = √(E − V0)
//! E ≤ 0:       T = 0
//! ```
//!
//! Both branches are evaluated through `g(E) = sinh(κa)/κ` (resp.
//! `sin(ka)/k`), so that `T = 4E / (4E + V0² g²)`; `g` tends to `a` at
//! `E = V0` from either side, which makes the curve continuous there with value
//! `[1 + V0 a²/4]⁻¹`. A node's weighted sum `v` maps to energy `E = g_E · v`
//! through the energy gain `g_E`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Distribution;

/// Half-width, in units of `(V0 − E)·a²`, of the window around `E = V0`
/// where `g` and `g'` are taken from their Taylor series.
const SERIES_WINDOW: f64 = 1e-3;
/// Beyond this `κa`, `sinh²` would overflow; the asymptotic form is used.
const ASYMPTOTIC_KAPPA_A: f64 = 350.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    /// Quantum-tunnelling transmission coefficient.
    Qt,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ActivationMode {
    /// The node outputs its transmission probability.
    Deterministic,
    /// The node fires (1) with its transmission probability, else 0.
    Stochastic,
}

/// Hidden-layer activation and its barrier parameters. For
/// [`ActivationKind::Relu`] the barrier fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub barrier_height: f64,
    pub barrier_thickness: f64,
    pub energy_gain: f64,
    pub mode: ActivationMode,
}

impl Default for ActivationSpec {
    fn default() -> Self {
        Self::qt(1.0, 1.0, 1.0)
    }
}

impl ActivationSpec {
    /// Deterministic tunnelling activation.
    pub fn qt(barrier_height: f64, barrier_thickness: f64, energy_gain: f64) -> Self {
        Self {
            kind: ActivationKind::Qt,
            barrier_height,
            barrier_thickness,
            energy_gain,
            mode: ActivationMode::Deterministic,
        }
    }

    pub fn relu() -> Self {
        Self {
            kind: ActivationKind::Relu,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: ActivationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("barrier_height", self.barrier_height),
            ("barrier_thickness", self.barrier_thickness),
            ("energy_gain", self.energy_gain),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_stochastic(&self) -> bool {
        self.kind == ActivationKind::Qt && self.mode == ActivationMode::Stochastic
    }

    /// Expected activation: the transmission probability for QT, `max(v, 0)`
    /// for ReLU.
    pub fn expected(&self, v: f64) -> f64 {
        match self.kind {
            ActivationKind::Qt => qt_transmission(self.energy_gain * v, self.barrier_height, self.barrier_thickness),
            ActivationKind::Relu => relu(v),
        }
    }

    /// Activation honouring the mode: stochastic QT nodes draw a Bernoulli
    /// sample from `rng`, everything else ignores it.
    pub fn activate<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        let t = self.expected(v);
        if self.is_stochastic() {
            if rng.random::<f64>() < t {
                1.0
            } else {
                0.0
            }
        } else {
            t
        }
    }

    /// Derivative of the expected activation with respect to `v`.
    pub fn derivative(&self, v: f64) -> f64 {
        match self.kind {
            ActivationKind::Qt => {
                self.energy_gain
                    * qt_transmission_derivative(self.energy_gain * v, self.barrier_height, self.barrier_thickness)
            }
            ActivationKind::Relu => relu_derivative(v),
        }
    }
}

/// `g(E)` and `g'(E)` with `g = sinh(κa)/κ` below the barrier top and
/// `sin(ka)/k` above it.
fn barrier_factor(e: f64, v0: f64, a: f64) -> (f64, f64) {
    let u = (v0 - e) * a * a;
    if u.abs() < SERIES_WINDOW {
        // sinh(x)/x = 1 + x²/6 + x⁴/120 + x⁶/5040 with x² = u (u < 0 gives sin)
        let g = a * (1.0 + u / 6.0 + u * u / 120.0 + u * u * u / 5040.0);
        // dg/dE = dg/du · (−a²)
        let g_prime = -a * a * a * (1.0 / 6.0 + u / 60.0 + u * u / 1680.0);
        (g, g_prime)
    } else if e < v0 {
        let kappa = (v0 - e).sqrt();
        let x = kappa * a;
        let (s, c) = (x.sinh(), x.cosh());
        let g = s / kappa;
        let g_prime = -(x * c - s) / (2.0 * kappa * kappa * kappa);
        (g, g_prime)
    } else {
        let k = (e - v0).sqrt();
        let x = k * a;
        let (s, c) = x.sin_cos();
        let g = s / k;
        let g_prime = (x * c - s) / (2.0 * k * k * k);
        (g, g_prime)
    }
}

/// Transmission coefficient through a rectangular barrier, in `[0, 1]`.
///
/// Non-finite inputs yield `NaN`; use [`try_qt_transmission`] for a checked
/// variant.
pub fn qt_transmission(e: f64, v0: f64, a: f64) -> f64 {
    if !(e.is_finite() && v0.is_finite() && a.is_finite()) {
        return f64::NAN;
    }
    if e <= 0.0 {
        return 0.0;
    }
    if e < v0 {
        let kappa_a = (v0 - e).sqrt() * a;
        if kappa_a > ASYMPTOTIC_KAPPA_A {
            return 16.0 * e * (v0 - e) / (v0 * v0) * (-2.0 * kappa_a).exp();
        }
    }
    let (g, _) = barrier_factor(e, v0, a);
    let t = 4.0 * e / (4.0 * e + v0 * v0 * g * g);
    t.clamp(0.0, 1.0)
}

/// Checked [`qt_transmission`]: rejects non-finite inputs and non-positive
/// barrier parameters.
pub fn try_qt_transmission(e: f64, v0: f64, a: f64) -> Result<f64> {
    if !e.is_finite() {
        return Err(Error::NonFinite("transmission energy"));
    }
    if !(v0.is_finite() && v0 > 0.0 && a.is_finite() && a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "barrier needs V0 > 0 and a > 0, got V0 = {v0}, a = {a}"
        )));
    }
    Ok(qt_transmission(e, v0, a))
}

/// `dT/dE`; zero for `E ≤ 0` (the one-sided value at the kink `E = 0`).
pub fn qt_transmission_derivative(e: f64, v0: f64, a: f64) -> f64 {
    if !(e.is_finite() && v0.is_finite() && a.is_finite()) {
        return f64::NAN;
    }
    if e <= 0.0 {
        return 0.0;
    }
    if e < v0 {
        let kappa = (v0 - e).sqrt();
        if kappa * a > ASYMPTOTIC_KAPPA_A {
            // T ≈ 16E(V0−E)/V0² · exp(−2κa),  d(−2κa)/dE = a/κ
            let decay = (-2.0 * kappa * a).exp();
            return 16.0 / (v0 * v0) * decay * ((v0 - 2.0 * e) + e * (v0 - e) * a / kappa);
        }
    }
    let (g, g_prime) = barrier_factor(e, v0, a);
    let gg = g * g;
    let denom = 4.0 * e + v0 * v0 * gg;
    // T = 4E / (4E + V0² g²)
    4.0 * v0 * v0 * (gg - 2.0 * e * g * g_prime) / (denom * denom)
}

/// Tunnelling activation of a weighted sum `v`.
pub fn qt_activation<R: Rng + ?Sized>(v: f64, spec: &ActivationSpec, rng: &mut R) -> Result<f64> {
    if spec.kind != ActivationKind::Qt {
        return Err(Error::KindMismatch("qt_activation called with a ReLU spec"));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("activation input"));
    }
    spec.validate()?;
    Ok(spec.activate(v, rng))
}

/// `d qt_activation / dv` of the deterministic transmission curve.
pub fn qt_activation_derivative(v: f64, spec: &ActivationSpec) -> Result<f64> {
    if spec.kind != ActivationKind::Qt {
        return Err(Error::KindMismatch("qt_activation_derivative called with a ReLU spec"));
    }
    Ok(spec.derivative(v))
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// 1 for `v > 0`, else 0 (including at the kink).
pub fn relu_derivative(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `exp(v_i) / Σ_k exp(v_k)`, computed after subtracting the maximum entry.
pub fn softmax(v: &[f64]) -> Result<Distribution> {
    if v.is_empty() {
        return Err(Error::InvalidParameter("softmax of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Distribution::new(exps.into_iter().map(|x| x / total).collect())
}
