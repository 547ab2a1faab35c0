//! Infinite-horizon LQR gains from the discrete Riccati equation with
//! energy-based state weights.

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Potential;

/// Lower bound on the position weight.
pub const WEIGHT_FLOOR: f64 = 1e-6;
pub const RICCATI_TOLERANCE: f64 = 1e-10;
pub const RICCATI_MAX_ITERATIONS: usize = 100_000;

/// Coordinate that enters the state-dependent weights of the nonlinear
/// potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightCoordinate {
    /// The estimated position x̂.
    #[default]
    Position,
    /// The Euclidean norm of the full estimated state.
    State,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub w1: Matrix2<f64>,
    pub w2: f64,
}

/// State cost whose quadratic form tracks the energy of the potential near
/// `s`; controls are free.
pub fn weights_for(potential: &Potential, s: &Vector2<f64>, mass: f64, coordinate: WeightCoordinate) -> LqrWeights {
    let r = match coordinate {
        WeightCoordinate::Position => s[0],
        WeightCoordinate::State => s.norm(),
    };
    let wx = match *potential {
        Potential::Quadratic { k } => k / 2.0,
        Potential::Cosine { amplitude, length } => {
            if r == 0.0 {
                amplitude * std::f64::consts::PI.powi(2) / (2.0 * length * length)
            } else {
                // |V(r)| = 2A sin²(πr/2l), free of cancellation near 0
                let half = (std::f64::consts::PI * r / (2.0 * length)).sin();
                2.0 * amplitude.abs() * half * half / (r * r)
            }
        }
        Potential::Quartic { k } => k * r * r,
        Potential::Flat => 0.0,
    };
    LqrWeights {
        w1: Matrix2::new(wx.max(WEIGHT_FLOOR), 0.0, 0.0, 1.0 / (2.0 * mass)),
        w2: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrGain {
    pub k: RowVector2<f64>,
    pub p: Matrix2<f64>,
    pub iterations: usize,
}

impl LqrGain {
    /// `u = clamp(−K ŝ, ±F_max)`
    pub fn control(&self, s_hat: &Vector2<f64>, force_max: f64) -> f64 {
        control(self, s_hat, force_max)
    }

    pub fn closed_loop(&self, a: &Matrix2<f64>, b: &Vector2<f64>) -> Matrix2<f64> {
        a - b * self.k
    }
}

fn riccati_gain(a: &Matrix2<f64>, b: &Vector2<f64>, w: &LqrWeights, p: &Matrix2<f64>) -> Option<RowVector2<f64>> {
    let denom = w.w2 + (b.transpose() * p * b)[0];
    (denom > 0.0 && denom.is_finite()).then(|| (b.transpose() * p * a) / denom)
}

/// One application of the Riccati map.
pub fn riccati_map(a: &Matrix2<f64>, b: &Vector2<f64>, w: &LqrWeights, p: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let k = riccati_gain(a, b, w, p)?;
    let next = w.w1 + a.transpose() * p * a - a.transpose() * p * b * k;
    Some((next + next.transpose()) * 0.5)
}

/// Fixed point of the Riccati map for `W2 = 0`.
///
/// With free controls `P − PBBᵀP/(BᵀPB) = γ(P)·(JB)(JB)ᵀ`, `J` the quarter
/// turn, so every iterate has the form `W1 + γ vvᵀ` with `v = AᵀJB` and the
/// map collapses to a Möbius map in the scalar `γ`.
fn free_control_fixed_point(a: &Matrix2<f64>, b: &Vector2<f64>, w1: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let v = a.transpose() * Vector2::new(b[1], -b[0]);
    let det = w1.determinant();
    let adj = Matrix2::new(w1[(1, 1)], -w1[(0, 1)], -w1[(1, 0)], w1[(0, 0)]);
    let ga = v.dot(&(adj * v));
    let c = b.dot(&(w1 * b));
    let d2 = v.dot(b).powi(2);
    let lin = c - ga;
    let gamma = if d2 > 0.0 {
        (-lin + (lin * lin + 4.0 * d2 * det).sqrt()) / (2.0 * d2)
    } else if lin > 0.0 {
        det / lin
    } else {
        return None;
    };
    (gamma.is_finite() && gamma >= 0.0).then(|| w1 + v * v.transpose() * gamma)
}

/// Value iteration on the Riccati map until the relative change drops below
/// [`RICCATI_TOLERANCE`]. Free controls start from the closed-form fixed
/// point, otherwise from `warm` or `W1`.
pub fn solve_gain(a: &Matrix2<f64>, b: &Vector2<f64>, w: &LqrWeights, warm: Option<&Matrix2<f64>>) -> Result<LqrGain> {
    if w.w2 < 0.0 || !w.w1.iter().all(|v| v.is_finite()) {
        return Err(Error::config("LQR weights must be finite with W2 ≥ 0"));
    }
    let seed = if w.w2 == 0.0 {
        free_control_fixed_point(a, b, &w.w1)
    } else {
        None
    };
    let mut p = seed.or(warm.copied()).unwrap_or(w.w1);
    let mut residual = f64::INFINITY;
    for iteration in 1..=RICCATI_MAX_ITERATIONS {
        let Some(next) = riccati_map(a, b, w, &p) else {
            break;
        };
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        residual = (next - p).abs().max();
        p = next;
        if residual <= RICCATI_TOLERANCE * p.abs().max() {
            let k = riccati_gain(a, b, w, &p).ok_or(Error::Gain {
                iterations: iteration,
                residual,
            })?;
            return Ok(LqrGain { k, p, iterations: iteration });
        }
    }
    Err(Error::Gain {
        iterations: RICCATI_MAX_ITERATIONS,
        residual,
    })
}

pub fn control(gain: &LqrGain, s_hat: &Vector2<f64>, force_max: f64) -> f64 {
    let u = -(gain.k * s_hat)[0];
    if u.is_nan() {
        return 0.0;
    }
    u.clamp(-force_max, force_max)
}

fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Gain synthesis for one episode: fixed for the quadratic potential,
/// re-solved at every decision for the others, warm-started from the last
/// solution and falling back to the last gain when a solve fails.
#[derive(Debug, Clone)]
pub struct LqrController {
    potential: Potential,
    mass: f64,
    force_max: f64,
    coordinate: WeightCoordinate,
    b: Vector2<f64>,
    last: Option<LqrGain>,
    fixed: bool,
}

impl LqrController {
    pub fn new(
        potential: Potential,
        a0: &Matrix2<f64>,
        b: Vector2<f64>,
        mass: f64,
        force_max: f64,
        coordinate: WeightCoordinate,
    ) -> Result<Self> {
        let fixed = matches!(potential, Potential::Quadratic { .. } | Potential::Flat);
        let weights = weights_for(&potential, &Vector2::zeros(), mass, coordinate);
        let first = solve_gain(a0, &b, &weights, None).map_err(|e| Error::config(format!("initial LQR gain: {e}")))?;
        if spectral_radius(&first.closed_loop(a0, &b)) >= 1.0 {
            log::warn!("closed loop at the origin is not contracting");
        }
        Ok(Self {
            potential,
            mass,
            force_max,
            coordinate,
            b,
            last: Some(first),
            fixed,
        })
    }

    pub fn gain(&self) -> Option<&LqrGain> {
        self.last.as_ref()
    }

    /// Force for estimate `s_hat`; `a` is the Jacobian at that estimate.
    pub fn act(&mut self, s_hat: &Vector2<f64>, a: &Matrix2<f64>) -> f64 {
        if !self.fixed {
            let weights = weights_for(&self.potential, s_hat, self.mass, self.coordinate);
            let warm = self.last.as_ref().map(|g| g.p);
            match solve_gain(a, &self.b, &weights, warm.as_ref()) {
                Ok(g) => self.last = Some(g),
                Err(e) => log::debug!("keeping previous gain: {e}"),
            }
        }
        match &self.last {
            Some(g) => control(g, s_hat, self.force_max),
            None => 0.0,
        }
    }
}
