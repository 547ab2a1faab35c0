//! Environment parameters and the inverted potentials.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and control parameters of one environment.
///
/// `Default` is the benchmark parametrization: every potential shares these
/// values, only the potential constants differ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Duration of one inner step.
    pub dt: f64,
    pub mass: f64,
    /// Dimensionless system/ancilla coupling λ of the weak measurement.
    pub coupling: f64,
    /// Position width of the initial wavepacket.
    pub sigma_system: f64,
    /// Width of the ancilla pointer state.
    pub sigma_ancilla: f64,
    /// Standard deviation of the uniform initial-momentum draw.
    pub p_init_spread: f64,
    pub x_threshold: f64,
    /// Largest control force magnitude. A force F held for one inner step
    /// transfers momentum F·dt.
    pub force_max: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.01 / PI,
            mass: 1.0 / PI,
            coupling: 0.05,
            sigma_system: 1.0,
            sigma_ancilla: 0.7,
            p_init_spread: 0.1,
            x_threshold: 8.0,
            force_max: 8.0 * PI,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("mass", self.mass),
            ("coupling", self.coupling),
            ("sigma_system", self.sigma_system),
            ("sigma_ancilla", self.sigma_ancilla),
            ("x_threshold", self.x_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.p_init_spread.is_finite() && self.p_init_spread >= 0.0) {
            return Err(Error::config("p_init_spread must be non-negative"));
        }
        if !(self.force_max.is_finite() && self.force_max >= 0.0) {
            return Err(Error::config("force_max must be non-negative"));
        }
        Ok(())
    }

    /// Momentum transferred by holding `force` for one inner step.
    #[inline]
    pub fn impulse(&self, force: f64) -> f64 {
        force * self.dt
    }

    pub fn clamp_force(&self, force: f64) -> f64 {
        force.clamp(-self.force_max, self.force_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Quadratic,
    Cosine,
    Quartic,
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialKind::Quadratic => "quadratic",
            PotentialKind::Cosine => "cosine",
            PotentialKind::Quartic => "quartic",
        })
    }
}

impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(PotentialKind::Quadratic),
            "cosine" => Ok(PotentialKind::Cosine),
            "quartic" => Ok(PotentialKind::Quartic),
            other => Err(Error::config(format!("unknown potential `{other}`"))),
        }
    }
}

/// An inverted potential V(x) with its maximum at the origin, V(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Potential {
    /// V(x) = -k x²/2
    Quadratic { k: f64 },
    /// V(x) = amplitude·(cos(πx/length) − 1)
    Cosine { amplitude: f64, length: f64 },
    /// V(x) = -k x⁴
    Quartic { k: f64 },
    /// V(x) = 0, used by tests and free-particle checks.
    Flat,
}

impl Potential {
    /// Benchmark quadratic potential, k = π.
    pub fn quadratic() -> Self {
        Potential::Quadratic { k: PI }
    }

    /// Benchmark quartic potential, k = π/100.
    pub fn quartic() -> Self {
        Potential::Quartic { k: PI / 100.0 }
    }

    /// Cosine potential whose curvature at the origin equals that of the
    /// quadratic potential with constant `k`: amplitude·π²/length² = k.
    pub fn cosine_matching_curvature(amplitude: f64, k: f64) -> Self {
        Potential::Cosine {
            amplitude,
            length: (amplitude * PI * PI / k).sqrt(),
        }
    }

    /// Cosine benchmark: amplitude 67 with the curvature of [`Potential::quadratic`].
    pub fn cosine() -> Self {
        Self::cosine_matching_curvature(67.0, PI)
    }

    pub fn benchmark(kind: PotentialKind) -> Self {
        match kind {
            PotentialKind::Quadratic => Self::quadratic(),
            PotentialKind::Cosine => Self::cosine(),
            PotentialKind::Quartic => Self::quartic(),
        }
    }

    pub fn kind(&self) -> Option<PotentialKind> {
        match self {
            Potential::Quadratic { .. } => Some(PotentialKind::Quadratic),
            Potential::Cosine { .. } => Some(PotentialKind::Cosine),
            Potential::Quartic { .. } => Some(PotentialKind::Quartic),
            Potential::Flat => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Potential::Quadratic { k } | Potential::Quartic { k } => k.is_finite() && k >= 0.0,
            Potential::Cosine { amplitude, length } => {
                amplitude.is_finite() && amplitude >= 0.0 && length.is_finite() && length > 0.0
            }
            Potential::Flat => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid potential constants: {self:?}")))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { k } => -0.5 * k * x * x,
            Potential::Cosine { amplitude, length } => amplitude * ((PI * x / length).cos() - 1.0),
            Potential::Quartic { k } => -k * x.powi(4),
            Potential::Flat => 0.0,
        }
    }

    /// dV/dx
    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { k } => -k * x,
            Potential::Cosine { amplitude, length } => {
                -amplitude * (PI / length) * (PI * x / length).sin()
            }
            Potential::Quartic { k } => -4.0 * k * x.powi(3),
            Potential::Flat => 0.0,
        }
    }

    /// d²V/dx²
    pub fn curvature(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { k } => -k,
            Potential::Cosine { amplitude, length } => {
                let w = PI / length;
                -amplitude * w * w * (w * x).cos()
            }
            Potential::Quartic { k } => -12.0 * k * x * x,
            Potential::Flat => 0.0,
        }
    }
}
