//! The two controlled systems behind one inner-step interface.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{measure, MeasurementConfig, Observable};
use crate::params::{Potential, SimParams};
use crate::quantum::{Grid, GridSpec, Propagator, Wavefunction};
use crate::surrogate::{build_model, ClassicalState, NoiseModel, Surrogate};

/// Largest probability tolerated in the edge cells of the grid.
pub const LEAKAGE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementOrder {
    #[default]
    PositionFirst,
    MomentumFirst,
}

impl MeasurementOrder {
    fn observables(self) -> [Observable; 2] {
        match self {
            MeasurementOrder::PositionFirst => [Observable::Position, Observable::Momentum],
            MeasurementOrder::MomentumFirst => [Observable::Momentum, Observable::Position],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Quantum,
    Classical,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Quantum => "quantum",
            SystemKind::Classical => "classical",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(SystemKind::Quantum),
            "classical" => Ok(SystemKind::Classical),
            other => Err(Error::config(format!("unknown system '{other}'"))),
        }
    }
}

/// Result of one kick/evolve/measure cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerStep {
    /// ⟨x⟩, ⟨p⟩ after evolution and before the measurements.
    pub truth: Vector2<f64>,
    /// Scaled measurement outcomes (x, p).
    pub y: Vector2<f64>,
    pub terminated: bool,
}

/// Wavefunction on a grid, kicked, evolved and weakly measured.
#[derive(Debug, Clone)]
pub struct QuantumPlant {
    params: SimParams,
    grid: Grid,
    propagator: Propagator,
    psi: Wavefunction,
    position: MeasurementConfig,
    momentum: MeasurementConfig,
    order: MeasurementOrder,
}

impl QuantumPlant {
    pub fn new(potential: &Potential, params: &SimParams, spec: GridSpec, order: MeasurementOrder) -> Result<Self> {
        params.validate()?;
        potential.validate()?;
        let grid = Grid::for_threshold(spec, params.x_threshold)?;
        let psi = Wavefunction::gaussian(&grid, 0.0, 0.0, params.sigma_system)?;
        Ok(Self {
            params: *params,
            propagator: Propagator::new(&grid, potential, params),
            position: MeasurementConfig::from_params(params, Observable::Position)?,
            momentum: MeasurementConfig::from_params(params, Observable::Momentum)?,
            grid,
            psi,
            order,
        })
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.psi = Wavefunction::init_wavepacket(&self.grid, &self.params, rng)?;
        Ok(())
    }

    pub fn wavefunction(&self) -> &Wavefunction {
        &self.psi
    }

    pub fn prob_outside(&self) -> f64 {
        self.psi.prob_outside(self.params.x_threshold)
    }

    /// Holds `force` for one step: the momentum grows by `force·dt`.
    pub fn step<R: Rng + ?Sized>(&mut self, force: f64, rng: &mut R) -> Result<InnerStep> {
        self.psi.apply_kick(-self.params.impulse(force));
        self.propagator.evolve(&mut self.psi);
        let weight = self.psi.boundary_weight();
        if weight > LEAKAGE_LIMIT {
            return Err(Error::Leakage { weight });
        }
        let m = self.psi.moments();
        let mut y = Vector2::zeros();
        for obs in self.order.observables() {
            let cfg = match obs {
                Observable::Position => &self.position,
                Observable::Momentum => &self.momentum,
            };
            let out = measure(&mut self.psi, cfg, rng)?;
            match obs {
                Observable::Position => y[0] = out.q_scaled,
                Observable::Momentum => y[1] = out.q_scaled,
            }
        }
        Ok(InnerStep {
            truth: Vector2::new(m.mean_x, m.mean_p),
            y,
            terminated: self.prob_outside() >= 0.5,
        })
    }
}

/// Point particle with calibrated correlated noise.
#[derive(Debug, Clone)]
pub struct ClassicalPlant {
    params: SimParams,
    system: Surrogate,
}

impl ClassicalPlant {
    pub fn new(potential: &Potential, params: &SimParams, noise: &NoiseModel) -> Result<Self> {
        params.validate()?;
        potential.validate()?;
        Ok(Self {
            params: *params,
            system: Surrogate::new(build_model(potential, params), noise, ClassicalState::default()),
        })
    }

    /// Starts at x = 0 with the same momentum draw as the wavepacket.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let half = self.params.p_init_spread * 3f64.sqrt();
        let p0 = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        self.system.reset(ClassicalState::new(0.0, p0));
    }

    pub fn state(&self) -> ClassicalState {
        self.system.state()
    }

    pub fn step<R: Rng + ?Sized>(&mut self, force: f64, rng: &mut R) -> Result<InnerStep> {
        let (s, y) = self.system.step(force, rng);
        if !s.is_finite() || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Estimator("surrogate state became non-finite".into()));
        }
        Ok(InnerStep {
            truth: s.to_vector(),
            y,
            terminated: s.x.abs() > self.params.x_threshold,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Plant {
    Quantum(Box<QuantumPlant>),
    Classical(ClassicalPlant),
}

impl Plant {
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        match self {
            Plant::Quantum(q) => q.reset(rng),
            Plant::Classical(c) => {
                c.reset(rng);
                Ok(())
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, force: f64, rng: &mut R) -> Result<InnerStep> {
        match self {
            Plant::Quantum(q) => q.step(force, rng),
            Plant::Classical(c) => c.step(force, rng),
        }
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            Plant::Quantum(_) => SystemKind::Quantum,
            Plant::Classical(_) => SystemKind::Classical,
        }
    }
}
