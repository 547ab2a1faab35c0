//! Grid representation of the wavefunction and its unitary dynamics.
//!
//! Positions live on a uniform periodic grid `x_i = -L + i·dx`, momenta on
//! the conjugate lattice of the discrete Fourier transform (ħ = 1).
//! Time evolution uses symmetric Strang splitting: half a potential phase,
//! a full kinetic phase in momentum space, another half potential phase.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Potential, SimParams};

/// Size of the simulation box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_points: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 512,
            half_width: 20.0,
        }
    }
}

struct GridInner {
    n: usize,
    half_width: f64,
    dx: f64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid with cached FFT plans. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.inner.n)
            .field("half_width", &self.inner.half_width)
            .field("dx", &self.inner.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.half_width == other.inner.half_width
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec { n_points: n, half_width } = spec;
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::config(format!("grid size must be a power of two >= 4, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::config(format!("grid half width must be positive, got {half_width}")));
        }
        let dx = 2.0 * half_width / n as f64;
        let positions = (0..n).map(|i| -half_width + i as f64 * dx).collect();
        let dp = 2.0 * PI / (n as f64 * dx);
        let momenta = (0..n)
            .map(|k| {
                let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                k * dp
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                half_width,
                dx,
                positions,
                momenta,
                forward,
                inverse,
            }),
        })
    }

    /// Grid that must also contain a threshold strictly inside the box.
    pub fn for_threshold(spec: GridSpec, x_threshold: f64) -> Result<Self> {
        if spec.half_width <= x_threshold {
            return Err(Error::config(format!(
                "grid half width {} must exceed the threshold {x_threshold}",
                spec.half_width
            )));
        }
        Self::new(spec)
    }

    pub fn len(&self) -> usize {
        self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn positions(&self) -> &[f64] {
        &self.inner.positions
    }

    /// Momentum lattice in FFT order.
    pub fn momenta(&self) -> &[f64] {
        &self.inner.momenta
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_points: self.inner.n,
            half_width: self.inner.half_width,
        }
    }

    /// Unnormalized forward transform; `Σ|φ_k|² = N Σ|ψ_i|²`.
    pub(crate) fn to_momentum(&self, amps: &mut [Complex64]) {
        self.inner.forward.process(amps);
    }

    /// Inverse of [`Grid::to_momentum`], including the 1/N factor.
    pub(crate) fn to_position(&self, amps: &mut [Complex64]) {
        self.inner.inverse.process(amps);
        let scale = 1.0 / self.inner.n as f64;
        for a in amps.iter_mut() {
            *a *= scale;
        }
    }
}

/// First and second moments of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

/// Pure state on a [`Grid`]. The norm is `Σ|ψ_i|² dx`.
#[derive(Clone)]
pub struct Wavefunction {
    grid: Grid,
    amps: Vec<Complex64>,
}

impl fmt::Debug for Wavefunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Wavefunction")
            .field("grid", &self.grid)
            .field("norm", &self.norm())
            .finish()
    }
}

impl Wavefunction {
    /// Wraps raw amplitudes and normalizes them.
    pub fn from_amplitudes(grid: &Grid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::config(format!(
                "expected {} amplitudes, got {}",
                grid.len(),
                amps.len()
            )));
        }
        let mut psi = Self { grid: grid.clone(), amps };
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::config("wavefunction has zero or non-finite norm"));
        }
        psi.scale(1.0 / norm.sqrt());
        Ok(psi)
    }

    /// Normalized Gaussian `exp(-(x-x0)²/(4σ²) + i p0 x)`, so Var(x) = σ².
    pub fn gaussian(grid: &Grid, center: f64, momentum: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::config(format!("wavepacket width must be positive, got {sigma}")));
        }
        if grid.dx() > sigma / 4.0 {
            return Err(Error::config(format!(
                "grid spacing {} too coarse for wavepacket width {sigma}",
                grid.dx()
            )));
        }
        let amps = grid
            .positions()
            .iter()
            .map(|&x| {
                let envelope = (-(x - center).powi(2) / (4.0 * sigma * sigma)).exp();
                Complex64::from_polar(envelope, momentum * x)
            })
            .collect();
        Self::from_amplitudes(grid, amps)
    }

    /// Initial state of an episode: a centered Gaussian of width
    /// `sigma_system` carrying a momentum drawn uniformly with standard
    /// deviation `p_init_spread`.
    pub fn init_wavepacket<R: Rng + ?Sized>(grid: &Grid, params: &SimParams, rng: &mut R) -> Result<Self> {
        let half = params.p_init_spread * 3f64.sqrt();
        let p0 = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        Self::gaussian(grid, 0.0, p0, params.sigma_system)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// Position probabilities `|ψ_i|² dx`.
    pub fn position_weights(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.amps.iter().map(|a| a.norm_sqr() * dx).collect()
    }

    /// Momentum amplitudes in FFT order (unnormalized transform).
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.amps.clone();
        self.grid.to_momentum(&mut buf);
        buf
    }

    /// Momentum probabilities in FFT order, summing to one.
    pub fn momentum_weights(&self) -> Vec<f64> {
        let buf = self.momentum_amplitudes();
        let total: f64 = buf.iter().map(|a| a.norm_sqr()).sum();
        buf.iter().map(|a| a.norm_sqr() / total).collect()
    }

    /// Applies the momentum shift `exp(-i·impulse·x)`, moving ⟨p⟩ by `-impulse`.
    pub fn apply_kick(&mut self, impulse: f64) {
        if impulse == 0.0 {
            return;
        }
        for (a, &x) in self.amps.iter_mut().zip(self.grid.positions()) {
            *a *= Complex64::from_polar(1.0, -impulse * x);
        }
    }

    pub fn mean_position(&self) -> f64 {
        let w = self.position_weights();
        let total: f64 = w.iter().sum();
        w.iter().zip(self.grid.positions()).map(|(w, x)| w * x).sum::<f64>() / total
    }

    pub fn moments(&self) -> Moments {
        let (mean_x, var_x) = weighted_moments(&self.position_weights(), self.grid.positions());
        let (mean_p, var_p) = weighted_moments(&self.momentum_weights(), self.grid.momenta());
        Moments {
            mean_x,
            mean_p,
            var_x,
            var_p,
        }
    }

    /// Probability mass with |x| > x_th. The grid cell straddling the
    /// threshold contributes the fraction of its width beyond it.
    pub fn prob_outside(&self, x_threshold: f64) -> f64 {
        let dx = self.grid.dx();
        let mut mass = 0.0;
        for (a, &x) in self.amps.iter().zip(self.grid.positions()) {
            let hi = x.abs() + 0.5 * dx;
            let frac = ((hi - x_threshold) / dx).clamp(0.0, 1.0);
            if frac > 0.0 {
                mass += frac * a.norm_sqr() * dx;
            }
        }
        (mass / self.norm()).clamp(0.0, 1.0)
    }

    /// Probability in the outermost cells on either side of the periodic box.
    pub fn boundary_weight(&self) -> f64 {
        let n = self.amps.len();
        (self.amps[0].norm_sqr() + self.amps[n - 1].norm_sqr()) * self.grid.dx() / self.norm()
    }
}

fn weighted_moments(weights: &[f64], values: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
    let var = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var)
}

/// Precomputed phases for one Strang step of duration `dt`.
#[derive(Clone)]
pub struct Propagator {
    grid: Grid,
    potential_half: Vec<Complex64>,
    kinetic: Vec<Complex64>,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator").field("grid", &self.grid).finish()
    }
}

impl Propagator {
    pub fn new(grid: &Grid, potential: &Potential, params: &SimParams) -> Self {
        Self::with_step(grid, potential, params.mass, params.dt)
    }

    pub fn with_step(grid: &Grid, potential: &Potential, mass: f64, dt: f64) -> Self {
        let potential_half = grid
            .positions()
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -0.5 * dt * potential.value(x)))
            .collect();
        let kinetic = grid
            .momenta()
            .iter()
            .map(|&p| Complex64::from_polar(1.0, -dt * p * p / (2.0 * mass)))
            .collect();
        Self {
            grid: grid.clone(),
            potential_half,
            kinetic,
        }
    }

    /// Advances `psi` in place by one step.
    pub fn evolve(&self, psi: &mut Wavefunction) {
        debug_assert!(psi.grid == self.grid);
        let amps = psi.amplitudes_mut();
        for (a, v) in amps.iter_mut().zip(&self.potential_half) {
            *a *= v;
        }
        self.grid.to_momentum(amps);
        for (a, t) in amps.iter_mut().zip(&self.kinetic) {
            *a *= t;
        }
        self.grid.to_position(amps);
        for (a, v) in amps.iter_mut().zip(&self.potential_half) {
            *a *= v;
        }
    }
}
