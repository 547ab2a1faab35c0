//! Kalman filter, correlated-noise Kalman filter and extended Kalman filter.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::surrogate::{symmetrize, LinearModel, NoiseModel};

/// A posteriori estimate and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub s_hat: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl EstimatorState {
    pub fn new(s_hat: Vector2<f64>, p: Matrix2<f64>) -> Self {
        Self { s_hat, p }
    }

    /// Matches the spread of the initial wavepacket: centered, with
    /// variances `σ_system²` and `p_init_spread²`.
    pub fn prior(params: &SimParams) -> Self {
        Self {
            s_hat: Vector2::zeros(),
            p: Matrix2::new(params.sigma_system.powi(2), 0.0, 0.0, params.p_init_spread.powi(2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    pub state: EstimatorState,
    /// `y − C ŝ⁻`
    pub innovation: Vector2<f64>,
    /// `y − C A ŝ_{t−1}`
    pub prediction_error: Vector2<f64>,
}

fn invert(m: &Matrix2<f64>, what: &str) -> Result<Matrix2<f64>> {
    let det = m.determinant();
    let scale = m.abs().max();
    if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
        return Err(Error::Estimator(format!("{what} is singular (det {det:e})")));
    }
    m.try_inverse()
        .ok_or_else(|| Error::Estimator(format!("{what} is singular")))
}

/// Measurement update with observation matrix `c` and noise `r`.
fn update(
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
    y: &Vector2<f64>,
    c: &Matrix2<f64>,
    r: &Matrix2<f64>,
) -> Result<(EstimatorState, Vector2<f64>)> {
    let innovation = y - c * mean;
    let s_cov = c * cov * c.transpose() + r;
    let gain = cov * c.transpose() * invert(&s_cov, "innovation covariance")?;
    let s_hat = mean + gain * innovation;
    let p = symmetrize(&((Matrix2::identity() - gain * c) * cov));
    if !s_hat.iter().chain(p.iter()).all(|v| v.is_finite()) {
        return Err(Error::Estimator("estimate became non-finite".into()));
    }
    Ok((EstimatorState { s_hat, p }, innovation))
}

/// One predict/update cycle on the linear model.
pub fn kf_step(
    est: &EstimatorState,
    y: &Vector2<f64>,
    u: f64,
    model: &LinearModel,
    noise: &NoiseModel,
) -> Result<FilterStep> {
    let mean = model.a * est.s_hat + model.b * u;
    let cov = model.a * est.p * model.a.transpose() + noise.process();
    let (state, innovation) = update(mean, cov, y, &model.c, noise.measurement())?;
    Ok(FilterStep {
        state,
        innovation,
        prediction_error: y - model.c * model.a * est.s_hat,
    })
}

/// Extended Kalman step: the mean follows `f` and the covariance the
/// Jacobian of `f` at the current estimate.
pub fn ekf_step(
    est: &EstimatorState,
    y: &Vector2<f64>,
    u: f64,
    model: &LinearModel,
    noise: &NoiseModel,
) -> Result<FilterStep> {
    if model.is_linear() {
        return kf_step(est, y, u, model, noise);
    }
    let a = model.jacobian(&est.s_hat, u);
    let mean = model.step_mean(&est.s_hat, u);
    let cov = a * est.p * a.transpose() + noise.process();
    let (state, innovation) = update(mean, cov, y, &model.c, noise.measurement())?;
    Ok(FilterStep {
        state,
        innovation,
        prediction_error: y - model.c * model.a * est.s_hat,
    })
}

/// The system rewritten so its process noise is uncorrelated with the
/// measurement noise: `s' = A* s + B u + T y + w*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelatedModel {
    pub a_star: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: Matrix2<f64>,
    /// `S R⁻¹`
    pub t: Matrix2<f64>,
    /// `Q − S R⁻¹ Sᵀ`
    pub q_star: Matrix2<f64>,
    pub r: Matrix2<f64>,
}

pub fn decorrelate(model: &LinearModel, noise: &NoiseModel) -> Result<DecorrelatedModel> {
    let r = *noise.measurement();
    let r_inv = invert(&r, "measurement covariance").map_err(|_| Error::config("measurement covariance is singular"))?;
    let t = noise.cross() * r_inv;
    Ok(DecorrelatedModel {
        a_star: model.a - t * model.c,
        b: model.b,
        c: model.c,
        t,
        q_star: schur(noise.process(), noise.cross(), &r_inv),
        r,
    })
}

/// `Q − S R⁻¹ Sᵀ` with round-off negatives removed.
fn schur(q: &Matrix2<f64>, s: &Matrix2<f64>, r_inv: &Matrix2<f64>) -> Matrix2<f64> {
    let raw = symmetrize(&(q - s * r_inv * s.transpose()));
    let eig = raw.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

impl DecorrelatedModel {
    /// Predicts with the previous measurement `y_prev` as an extra input and
    /// updates with the new one.
    pub fn kf_step(
        &self,
        est: &EstimatorState,
        y_prev: &Vector2<f64>,
        y: &Vector2<f64>,
        u: f64,
    ) -> Result<FilterStep> {
        let mean = self.a_star * est.s_hat + self.b * u + self.t * y_prev;
        let cov = self.a_star * est.p * self.a_star.transpose() + self.q_star;
        let (state, innovation) = update(mean, cov, y, &self.c, &self.r)?;
        let a = self.a_star + self.t * self.c;
        Ok(FilterStep {
            state,
            innovation,
            prediction_error: y - self.c * a * est.s_hat,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    None,
    #[serde(rename = "kf")]
    Kalman,
    #[serde(rename = "kf-decorr")]
    KalmanDecorrelated,
    Ekf,
    #[serde(rename = "ekf-decorr")]
    EkfDecorrelated,
    /// Estimates are supplied over the agent protocol.
    Agent,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::None => "none",
            EstimatorKind::Kalman => "kf",
            EstimatorKind::KalmanDecorrelated => "kf-decorr",
            EstimatorKind::Ekf => "ekf",
            EstimatorKind::EkfDecorrelated => "ekf-decorr",
            EstimatorKind::Agent => "agent",
        }
    }

    /// Whether an in-process filter runs for this kind.
    pub fn is_filter(self) -> bool {
        !matches!(self, EstimatorKind::None | EstimatorKind::Agent)
    }

    fn extended(self) -> bool {
        matches!(self, EstimatorKind::Ekf | EstimatorKind::EkfDecorrelated)
    }

    fn decorrelated(self) -> bool {
        matches!(self, EstimatorKind::KalmanDecorrelated | EstimatorKind::EkfDecorrelated)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            EstimatorKind::None,
            EstimatorKind::Kalman,
            EstimatorKind::KalmanDecorrelated,
            EstimatorKind::Ekf,
            EstimatorKind::EkfDecorrelated,
            EstimatorKind::Agent,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::config(format!("unknown estimator '{s}'")))
    }
}

/// Which transition enters the prediction error `e_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionErrorForm {
    /// `y_t − C A ŝ_{t−1}` with the linearization at the origin.
    #[default]
    Linear,
    /// `y_t − C f(ŝ_{t−1}, u)` through the full block of inner steps.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterOptions {
    /// Divide the measurement covariance by N_meas for averaged outcomes.
    pub scale_measurement: bool,
    pub prediction_error: PredictionErrorForm,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            scale_measurement: true,
            prediction_error: PredictionErrorForm::Linear,
        }
    }
}

/// Transition over `n` inner steps with the force held.
#[derive(Debug, Clone, Copy)]
struct Block {
    mean: Vector2<f64>,
    jacobian: Matrix2<f64>,
    process: Matrix2<f64>,
    /// Jacobian of the last `n − 1` steps, carrying the noise that entered
    /// on the first one.
    tail: Matrix2<f64>,
}

fn propagate(model: &LinearModel, noise: &NoiseModel, s: &Vector2<f64>, u: f64, n: usize, extended: bool) -> Block {
    let extended = extended && !model.is_linear();
    let mut mean = *s;
    let mut jacobian = Matrix2::identity();
    let mut process = Matrix2::zeros();
    let mut tail = Matrix2::identity();
    for i in 0..n {
        let a = if extended { model.jacobian(&mean, u) } else { model.a };
        mean = if extended {
            model.step_mean(&mean, u)
        } else {
            model.a * mean + model.b * u
        };
        jacobian = a * jacobian;
        process = a * process * a.transpose() + noise.process();
        if i > 0 {
            tail = a * tail;
        }
    }
    Block {
        mean,
        jacobian,
        process: symmetrize(&process),
        tail,
    }
}

/// `y − C Aⁿ ŝ` or `y − C fⁿ(ŝ, u)` for an estimate one controller decision old.
pub fn prediction_error(
    model: &LinearModel,
    form: PredictionErrorForm,
    s_prev: &Vector2<f64>,
    y: &Vector2<f64>,
    u: f64,
    n_meas: usize,
) -> Vector2<f64> {
    let predicted = match form {
        PredictionErrorForm::Linear => model.a.pow(n_meas as u32) * s_prev,
        PredictionErrorForm::Model => (0..n_meas).fold(*s_prev, |s, _| model.step_mean(&s, u)),
    };
    y - model.c * predicted
}

/// Filter driven once per controller decision by the averaged outcomes of
/// `n_meas` inner steps.
#[derive(Debug, Clone)]
pub struct StateEstimator {
    kind: EstimatorKind,
    model: LinearModel,
    noise: NoiseModel,
    n_meas: usize,
    options: FilterOptions,
    initial: EstimatorState,
    state: EstimatorState,
    prev_y: Option<Vector2<f64>>,
    r: Matrix2<f64>,
    r_inv: Matrix2<f64>,
}

impl StateEstimator {
    pub fn new(
        kind: EstimatorKind,
        model: LinearModel,
        noise: NoiseModel,
        n_meas: usize,
        initial: EstimatorState,
        options: FilterOptions,
    ) -> Result<Self> {
        if !kind.is_filter() {
            return Err(Error::config(format!("'{kind}' is not an in-process filter")));
        }
        if n_meas == 0 {
            return Err(Error::config("n_meas must be at least 1"));
        }
        let r = if options.scale_measurement {
            noise.measurement() / n_meas as f64
        } else {
            *noise.measurement()
        };
        let r_inv = invert(&r, "measurement covariance").map_err(|_| Error::config("measurement covariance is singular"))?;
        Ok(Self {
            kind,
            model,
            noise,
            n_meas,
            options,
            initial,
            state: initial,
            prev_y: None,
            r,
            r_inv,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn reset(&mut self) {
        self.state = self.initial;
        self.prev_y = None;
    }

    pub fn estimate(&self) -> &EstimatorState {
        &self.state
    }

    /// Consumes the averaged outcome `y` of a block driven by force `u`.
    pub fn step(&mut self, y: &Vector2<f64>, u: f64) -> Result<FilterStep> {
        let block = propagate(&self.model, &self.noise, &self.state.s_hat, u, self.n_meas, self.kind.extended());
        let (mean, a, q) = match (self.kind.decorrelated(), self.prev_y) {
            (true, Some(y_prev)) => {
                let cross = block.tail * self.noise.cross() / self.n_meas as f64;
                let t = cross * self.r_inv;
                let mean = block.mean + t * (y_prev - self.model.c * self.state.s_hat);
                (mean, block.jacobian - t * self.model.c, schur(&block.process, &cross, &self.r_inv))
            }
            _ => (block.mean, block.jacobian, block.process),
        };
        let cov = a * self.state.p * a.transpose() + q;
        let prediction_error = prediction_error(
            &self.model,
            self.options.prediction_error,
            &self.state.s_hat,
            y,
            u,
            self.n_meas,
        );
        let (state, innovation) = update(mean, cov, y, &self.model.c, &self.r)?;
        self.state = state;
        self.prev_y = Some(*y);
        Ok(FilterStep {
            state,
            innovation,
            prediction_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Potential;
    use crate::surrogate::build_model;
    use nalgebra::DMatrix;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn quadratic() -> LinearModel {
        build_model(&Potential::quadratic(), &SimParams::default())
    }

    #[test]
    fn exact_measurement_pins_estimate() {
        let zero = NoiseModel::new(Matrix2::identity() * 1e-30, Matrix2::zeros(), Matrix2::zeros()).unwrap();
        let est = EstimatorState::new(Vector2::new(3.0, -2.0), Matrix2::identity() * 1e6);
        let y = Vector2::new(0.4, 0.1);
        let out = kf_step(&est, &y, 0.0, &quadratic(), &zero).unwrap();
        assert!((out.state.s_hat - y).abs().max() < 1e-12);
    }

    #[test]
    fn uninformative_measurement_is_pure_prediction() {
        let model = quadratic();
        let noise = NoiseModel::new(Matrix2::identity() * 1e30, Matrix2::identity() * 0.01, Matrix2::zeros()).unwrap();
        let est = EstimatorState::new(Vector2::new(0.5, 0.2), Matrix2::identity());
        let out = kf_step(&est, &Vector2::new(100.0, -100.0), 2.0, &model, &noise).unwrap();
        let predicted = model.a * est.s_hat + model.b * 2.0;
        assert!((out.state.s_hat - predicted).abs().max() < 1e-12);
    }

    #[test]
    fn singular_innovation_is_a_fault() {
        let zero = NoiseModel::new(Matrix2::zeros(), Matrix2::zeros(), Matrix2::zeros()).unwrap();
        let est = EstimatorState::new(Vector2::zeros(), Matrix2::zeros());
        let err = kf_step(&est, &Vector2::zeros(), 0.0, &quadratic(), &zero).unwrap_err();
        assert!(matches!(err, Error::Estimator(_)));
    }

    /// Final-time estimate of the batch weighted least-squares problem over
    /// the whole trajectory `s_0..s_T`.
    fn batch_estimate(
        model: &LinearModel,
        q: &Matrix2<f64>,
        r: &Matrix2<f64>,
        prior: &EstimatorState,
        ys: &[Vector2<f64>],
        us: &[f64],
    ) -> Vector2<f64> {
        let n = ys.len() + 1;
        let dim = 2 * n;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut g = DVector::<f64>::zeros(dim);
        let p_inv = prior.p.try_inverse().unwrap();
        let q_inv = q.try_inverse().unwrap();
        let r_inv = r.try_inverse().unwrap();
        let mut add = |i: usize, j: usize, m: &Matrix2<f64>| {
            for a in 0..2 {
                for b in 0..2 {
                    h[(2 * i + a, 2 * j + b)] += m[(a, b)];
                }
            }
        };
        add(0, 0, &p_inv);
        let gp = p_inv * prior.s_hat;
        g[0] += gp[0];
        g[1] += gp[1];
        let a = model.a;
        for t in 1..n {
            // process term (s_t − A s_{t−1} − B u)ᵀ Q⁻¹ (…)
            add(t, t, &q_inv);
            add(t - 1, t - 1, &(a.transpose() * q_inv * a));
            add(t, t - 1, &(-q_inv * a));
            add(t - 1, t, &(-a.transpose() * q_inv));
            let bu = model.b * us[t - 1];
            let gt = q_inv * bu;
            let gtm = -a.transpose() * q_inv * bu;
            // measurement term
            add(t, t, &r_inv);
            let gy = r_inv * ys[t - 1];
            for k in 0..2 {
                g[2 * t + k] += gt[k] + gy[k];
                g[2 * (t - 1) + k] += gtm[k];
            }
        }
        let sol = h.lu().solve(&g).unwrap();
        Vector2::new(sol[dim - 2], sol[dim - 1])
    }

    #[test]
    fn matches_batch_least_squares() {
        let model = quadratic();
        let q = Matrix2::new(0.02, 0.005, 0.005, 0.03);
        let r = Matrix2::new(4.0, 0.3, 0.3, 2.0);
        let noise = NoiseModel::new(r, q, Matrix2::zeros()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let prior = EstimatorState::new(Vector2::new(0.2, -0.1), Matrix2::new(1.0, 0.0, 0.0, 0.01));
        let mut s = Vector2::new(0.5, 0.05);
        let (mut ys, mut us) = (Vec::new(), Vec::new());
        let mut est = prior;
        for t in 0..50 {
            let u = 3.0 * (t as f64 * 0.3).sin();
            s = model.a * s + model.b * u + q.cholesky().unwrap().l() * Vector2::from_fn(|_, _| normal.sample(&mut rng));
            let y = s + r.cholesky().unwrap().l() * Vector2::from_fn(|_, _| normal.sample(&mut rng));
            est = kf_step(&est, &y, u, &model, &noise).unwrap().state;
            ys.push(y);
            us.push(u);
        }
        let batch = batch_estimate(&model, &q, &r, &prior, &ys, &us);
        assert!((batch - est.s_hat).abs().max() < 1e-8, "{batch} vs {}", est.s_hat);
    }

    #[test]
    fn decorrelation_without_cross_is_identity() {
        let model = quadratic();
        let noise = NoiseModel::new(Matrix2::identity() * 4.0, Matrix2::identity() * 0.1, Matrix2::zeros()).unwrap();
        let d = decorrelate(&model, &noise).unwrap();
        assert_eq!(d.t, Matrix2::zeros());
        assert_eq!(d.a_star, model.a);
        assert_eq!(d.q_star, *noise.process());
    }

    #[test]
    fn fully_correlated_scalar_algebra() {
        // S = R: T = 1 on the diagonal and Q* = Q − R
        let model = quadratic();
        let r = 0.5;
        let q = 2.0;
        let noise = NoiseModel::new(Matrix2::identity() * r, Matrix2::identity() * q, Matrix2::identity() * r).unwrap();
        let d = decorrelate(&model, &noise).unwrap();
        assert!((d.t - Matrix2::identity()).abs().max() < 1e-15);
        assert!((d.q_star - Matrix2::identity() * (q - r)).abs().max() < 1e-15);
        assert!((d.a_star - (model.a - Matrix2::identity())).abs().max() < 1e-15);
    }

    #[test]
    fn singular_measurement_cannot_be_decorrelated() {
        let noise = NoiseModel::new(Matrix2::zeros(), Matrix2::identity(), Matrix2::zeros()).unwrap();
        assert!(decorrelate(&quadratic(), &noise).unwrap_err().is_config());
    }

    #[test]
    fn ekf_equals_kf_on_quadratic() {
        let model = quadratic();
        let noise = NoiseModel::new(Matrix2::identity() * 4.0, Matrix2::identity() * 0.1, Matrix2::zeros()).unwrap();
        let mut a = EstimatorState::prior(&SimParams::default());
        let mut b = a;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = Normal::new(0.0, 2.0).unwrap();
        for t in 0..200 {
            let y = Vector2::from_fn(|_, _| normal.sample(&mut rng));
            let u = (t as f64).cos();
            let ka = kf_step(&a, &y, u, &model, &noise).unwrap();
            let kb = ekf_step(&b, &y, u, &model, &noise).unwrap();
            assert!((ka.state.s_hat - kb.state.s_hat).abs().max() < 1e-12);
            a = ka.state;
            b = kb.state;
        }
    }

    #[test]
    fn quartic_flat_top_predicts_free_flight() {
        let params = SimParams::default();
        let model = build_model(&Potential::quartic(), &params);
        let a = model.jacobian(&Vector2::new(0.0, 0.0), 0.0);
        assert_eq!(a[(1, 0)], 0.0);
        let free = build_model(&Potential::Flat, &params);
        assert_eq!(a, free.a);
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let model = quadratic();
        let noise = NoiseModel::new(
            Matrix2::new(197.0, 1.0, 1.0, 196.0),
            Matrix2::new(0.0386, 0.0385, 0.0385, 0.0386),
            Matrix2::new(1.95, 0.0, 1.94, 0.0),
        )
        .unwrap();
        let mut est = StateEstimator::new(
            EstimatorKind::KalmanDecorrelated,
            model,
            noise,
            1,
            EstimatorState::prior(&SimParams::default()),
            FilterOptions::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 14.0).unwrap();
        for _ in 0..100_000 {
            let y = Vector2::from_fn(|_, _| normal.sample(&mut rng));
            est.step(&y, 0.0).unwrap();
            let p = est.estimate().p;
            assert_eq!(p[(0, 1)], p[(1, 0)]);
        }
        let eig = est.estimate().p.symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-10);
    }

    #[test]
    fn block_of_one_matches_single_step_filters() {
        let model = quadratic();
        let noise = NoiseModel::new(
            Matrix2::new(9.0, 0.5, 0.5, 8.0),
            Matrix2::new(0.04, 0.03, 0.03, 0.04),
            Matrix2::new(0.3, 0.1, 0.2, 0.3),
        )
        .unwrap();
        let prior = EstimatorState::prior(&SimParams::default());
        let mut plain = StateEstimator::new(EstimatorKind::Kalman, model, noise, 1, prior, FilterOptions::default()).unwrap();
        let mut decor =
            StateEstimator::new(EstimatorKind::KalmanDecorrelated, model, noise, 1, prior, FilterOptions::default()).unwrap();
        let d = decorrelate(&model, &noise).unwrap();
        let (mut a, mut b) = (prior, prior);
        let mut y_prev = None;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(0.0, 3.0).unwrap();
        for t in 0..100 {
            let y = Vector2::from_fn(|_, _| normal.sample(&mut rng));
            let u = 0.1 * t as f64;
            a = kf_step(&a, &y, u, &model, &noise).unwrap().state;
            b = match y_prev {
                Some(yp) => d.kf_step(&b, &yp, &y, u).unwrap().state,
                None => kf_step(&b, &y, u, &model, &noise).unwrap().state,
            };
            y_prev = Some(y);
            let pa = plain.step(&y, u).unwrap().state;
            let pb = decor.step(&y, u).unwrap().state;
            assert!((pa.s_hat - a.s_hat).abs().max() < 1e-9);
            assert!((pb.s_hat - b.s_hat).abs().max() < 1e-9);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ["none", "kf", "kf-decorr", "ekf", "ekf-decorr", "agent"] {
            assert_eq!(k.parse::<EstimatorKind>().unwrap().name(), k);
        }
        assert!("ukf".parse::<EstimatorKind>().is_err());
    }
}
