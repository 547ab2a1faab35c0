//! Classical stochastic surrogate of the quantum cartpole.
//!
//! State `s = (x, p)`, dynamics `s' = f(s, u) + w`, observation `y = s + v`
//! with `(w, v)` jointly Gaussian. The surrogate reproduces the ordering of
//! the quantum loop: the back-action `w` drawn together with a measurement
//! noise `v` only moves the state on the *following* transition.

mod artifact;
mod calibrate;

pub use artifact::{read_artifact, write_artifact, NoiseArtifact, ARTIFACT_FORMAT, ARTIFACT_VERSION};
pub use calibrate::{calibrate_noise, CalibrationOptions, CalibrationReport};

use nalgebra::{DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Potential, SimParams};

/// Point-particle state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub p: f64,
}

impl ClassicalState {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

impl From<Vector2<f64>> for ClassicalState {
    fn from(v: Vector2<f64>) -> Self {
        Self { x: v[0], p: v[1] }
    }
}

/// Relative tolerance on negative eigenvalues when checking PSD.
const PSD_TOLERANCE: f64 = 1e-9;

fn check_psd<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("{what} has non-finite entries")));
    }
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return Err(Error::config(format!("{what} is not symmetric")));
    }
    let min = DMatrix::from_column_slice(N, N, m.as_slice()).symmetric_eigenvalues().min();
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::config(format!("{what} is not positive semidefinite (eigenvalue {min:e})")));
    }
    Ok(())
}

/// Covariances of the surrogate noise, in state units.
///
/// `measurement` is cov(v), `process` is cov(w) and `cross` is cov(w, v),
/// i.e. `E[w vᵀ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    measurement: Matrix2<f64>,
    process: Matrix2<f64>,
    cross: Matrix2<f64>,
}

impl NoiseModel {
    pub fn new(measurement: Matrix2<f64>, process: Matrix2<f64>, cross: Matrix2<f64>) -> Result<Self> {
        let model = Self {
            measurement: symmetrize(&measurement),
            process: symmetrize(&process),
            cross,
        };
        check_psd(&measurement, "measurement covariance")?;
        check_psd(&process, "process covariance")?;
        check_psd(&model.joint(), "joint noise covariance")?;
        Ok(model)
    }

    /// Independent isotropic noise: `cov(v) = σ_meas² I`, `cov(w) = σ_dyn² I`.
    pub fn uncorrelated(sigma_meas: f64, sigma_dyn: f64) -> Result<Self> {
        Self::new(
            Matrix2::identity() * sigma_meas * sigma_meas,
            Matrix2::identity() * sigma_dyn * sigma_dyn,
            Matrix2::zeros(),
        )
    }

    pub fn measurement(&self) -> &Matrix2<f64> {
        &self.measurement
    }

    pub fn process(&self) -> &Matrix2<f64> {
        &self.process
    }

    pub fn cross(&self) -> &Matrix2<f64> {
        &self.cross
    }

    /// Same model with the cross-covariance dropped.
    pub fn without_cross(&self) -> Self {
        Self {
            cross: Matrix2::zeros(),
            ..*self
        }
    }

    /// `[[cov(w), cov(w,v)], [cov(v,w), cov(v)]]`
    pub fn joint(&self) -> Matrix4<f64> {
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.process);
        j.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.cross);
        j.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.cross.transpose());
        j.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.measurement);
        j
    }

    pub fn sampler(&self) -> NoiseSampler {
        NoiseSampler::new(&self.joint())
    }
}

pub(crate) fn symmetrize(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Draws `(w, v)` pairs with a given joint covariance.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    root: Matrix4<f64>,
}

impl NoiseSampler {
    /// The symmetric square root handles singular (rank-deficient) joints,
    /// which calibrated back-action noise typically is.
    pub fn new(joint: &Matrix4<f64>) -> Self {
        let SymmetricEigen {
            eigenvectors,
            eigenvalues,
        } = joint.symmetric_eigen();
        let sqrt = Matrix4::from_diagonal(&eigenvalues.map(|l| l.max(0.0).sqrt()));
        Self {
            root: eigenvectors * sqrt * eigenvectors.transpose(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vector2<f64>, Vector2<f64>) {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = self.root * z;
        (Vector2::new(n[0], n[1]), Vector2::new(n[2], n[3]))
    }
}

/// Discrete-time model of one inner step.
///
/// The force acts first, as the kick does in the quantum loop, followed by a
/// symplectic Euler step, position first:
/// `p₊ = p + u·dt`, `x' = x + p₊·dt/m`, `p' = p₊ − V'(x')·dt`.
/// The observation map is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    /// Jacobian of `f` at the origin.
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: Matrix2<f64>,
    pub potential: Potential,
    pub dt: f64,
    pub mass: f64,
}

pub fn build_model(potential: &Potential, params: &SimParams) -> LinearModel {
    let mut model = LinearModel {
        a: Matrix2::identity(),
        b: Vector2::new(params.dt * params.dt / params.mass, params.dt),
        c: Matrix2::identity(),
        potential: *potential,
        dt: params.dt,
        mass: params.mass,
    };
    model.a = model.jacobian(&Vector2::zeros(), 0.0);
    model
}

impl LinearModel {
    /// Deterministic part of one step, `f(s, u)`.
    pub fn step_mean(&self, s: &Vector2<f64>, u: f64) -> Vector2<f64> {
        let kicked = s[1] + u * self.dt;
        let x = s[0] + kicked * self.dt / self.mass;
        Vector2::new(x, kicked - self.potential.slope(x) * self.dt)
    }

    /// `∂f/∂s` at `(s, u)`.
    pub fn jacobian(&self, s: &Vector2<f64>, u: f64) -> Matrix2<f64> {
        let h = self.dt / self.mass;
        let x = s[0] + (s[1] + u * self.dt) * h;
        let c = self.potential.curvature(x) * self.dt;
        Matrix2::new(1.0, h, -c, 1.0 - c * h)
    }

    pub fn observe(&self, s: &Vector2<f64>) -> Vector2<f64> {
        self.c * s
    }

    /// Whether `f` is affine, so `jacobian` is constant and equal to `a`.
    pub fn is_linear(&self) -> bool {
        matches!(self.potential, Potential::Quadratic { .. } | Potential::Flat)
    }
}

/// A running surrogate system.
#[derive(Debug, Clone)]
pub struct Surrogate {
    model: LinearModel,
    sampler: NoiseSampler,
    state: Vector2<f64>,
    pending: Vector2<f64>,
}

impl Surrogate {
    pub fn new(model: LinearModel, noise: &NoiseModel, initial: ClassicalState) -> Self {
        Self {
            model,
            sampler: noise.sampler(),
            state: initial.to_vector(),
            pending: Vector2::zeros(),
        }
    }

    pub fn reset(&mut self, initial: ClassicalState) {
        self.state = initial.to_vector();
        self.pending = Vector2::zeros();
    }

    pub fn state(&self) -> ClassicalState {
        self.state.into()
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    /// Advances one inner step under force `u` and returns the new state and
    /// its observation. The process noise applied here is the one drawn with
    /// the previous observation; a fresh `(w, v)` pair is drawn for this one.
    pub fn step<R: Rng + ?Sized>(&mut self, u: f64, rng: &mut R) -> (ClassicalState, Vector2<f64>) {
        self.state = self.model.step_mean(&self.state, u) + self.pending;
        let (w, v) = self.sampler.draw(rng);
        self.pending = w;
        let y = self.model.observe(&self.state) + v;
        (self.state.into(), y)
    }
}
