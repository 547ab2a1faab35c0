//! Weak position and momentum measurements through a Gaussian ancilla.
//!
//! The Kraus operator for pointer reading `q` is a Gaussian weighted sum of
//! projectors onto the eigenstates `|α⟩` of the measured observable:
//!
//! ```text
//! M_q ∝ Σ_α exp[-(q - λα)² / (4σ²)] |α⟩⟨α|
//! ```
//!
//! so `P(q) = Σ_α |ψ(α)|² N(q; λα, σ²)`. Outcomes are drawn in two stages
//! (eigenvalue from `|ψ(α)|²`, then Gaussian pointer noise), which has exactly
//! that law on the grid.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::quantum::Wavefunction;

/// Post-measurement norms below this mean the outcome had no support.
const MIN_KRAUS_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Position,
    Momentum,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Position => "position",
            Observable::Momentum => "momentum",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "position" | "x" => Ok(Observable::Position),
            "momentum" | "p" => Ok(Observable::Momentum),
            other => Err(Error::config(format!("unknown observable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    /// λ
    pub coupling: f64,
    pub ancilla_width: f64,
    pub observable: Observable,
}

impl MeasurementConfig {
    pub fn new(coupling: f64, ancilla_width: f64, observable: Observable) -> Result<Self> {
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(Error::config(format!("measurement coupling must be positive, got {coupling}")));
        }
        if !(ancilla_width.is_finite() && ancilla_width > 0.0) {
            return Err(Error::config(format!("ancilla width must be positive, got {ancilla_width}")));
        }
        Ok(Self {
            coupling,
            ancilla_width,
            observable,
        })
    }

    pub fn from_params(params: &SimParams, observable: Observable) -> Result<Self> {
        Self::new(params.coupling, params.sigma_ancilla, observable)
    }

    /// Standard deviation of the pointer noise expressed in observable units.
    pub fn scaled_noise(&self) -> f64 {
        self.ancilla_width / self.coupling
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    /// Ancilla pointer reading q.
    pub q_raw: f64,
    /// q/λ, the estimate of the observable handed to controllers.
    pub q_scaled: f64,
}

impl MeasurementOutcome {
    fn new(q_raw: f64, cfg: &MeasurementConfig) -> Self {
        Self {
            q_raw,
            q_scaled: q_raw / cfg.coupling,
        }
    }
}

/// Eigenvalues and probabilities of the measured observable.
fn spectrum(psi: &Wavefunction, observable: Observable) -> (Vec<f64>, &[f64]) {
    match observable {
        Observable::Position => (psi.position_weights(), psi.grid().positions()),
        Observable::Momentum => (psi.momentum_weights(), psi.grid().momenta()),
    }
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding at the top of the cumulative sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Draws a pointer reading with law `P(q) = Tr[M_q† M_q |ψ⟩⟨ψ|]`.
pub fn sample_outcome<R: Rng + ?Sized>(psi: &Wavefunction, cfg: &MeasurementConfig, rng: &mut R) -> MeasurementOutcome {
    let (weights, eigenvalues) = spectrum(psi, cfg.observable);
    let alpha = eigenvalues[draw_index(&weights, rng)];
    let noise: f64 = rng.sample(StandardNormal);
    MeasurementOutcome::new(cfg.coupling * alpha + cfg.ancilla_width * noise, cfg)
}

/// Applies the Kraus operator for reading `q_raw` and renormalizes.
pub fn apply_backaction(psi: &mut Wavefunction, q_raw: f64, cfg: &MeasurementConfig) -> Result<()> {
    let four_var = 4.0 * cfg.ancilla_width * cfg.ancilla_width;
    let kraus = |alpha: f64| (-(q_raw - cfg.coupling * alpha).powi(2) / four_var).exp();
    match cfg.observable {
        Observable::Position => {
            let grid = psi.grid().clone();
            for (a, &x) in psi.amplitudes_mut().iter_mut().zip(grid.positions()) {
                *a *= kraus(x);
            }
        }
        Observable::Momentum => {
            let grid = psi.grid().clone();
            let amps = psi.amplitudes_mut();
            grid.to_momentum(amps);
            for (a, &p) in amps.iter_mut().zip(grid.momenta()) {
                *a *= kraus(p);
            }
            grid.to_position(amps);
        }
    }
    let norm = psi.norm();
    if !(norm >= MIN_KRAUS_NORM) {
        return Err(Error::Measurement {
            norm,
            q_raw,
            observable: cfg.observable.name(),
        });
    }
    psi.scale(1.0 / norm.sqrt());
    Ok(())
}

/// Samples an outcome and collapses `psi` accordingly.
pub fn measure<R: Rng + ?Sized>(psi: &mut Wavefunction, cfg: &MeasurementConfig, rng: &mut R) -> Result<MeasurementOutcome> {
    let outcome = sample_outcome(psi, cfg, rng);
    apply_backaction(psi, outcome.q_raw, cfg)?;
    Ok(outcome)
}

/// Outcome density `P(q)` by direct summation over the grid spectrum.
pub fn outcome_density(psi: &Wavefunction, cfg: &MeasurementConfig, q: f64) -> f64 {
    let (weights, eigenvalues) = spectrum(psi, cfg.observable);
    let s = cfg.ancilla_width;
    let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .zip(eigenvalues)
        .map(|(w, a)| w * norm * (-(q - cfg.coupling * a).powi(2) / (2.0 * s * s)).exp())
        .sum::<f64>()
        / total
}
