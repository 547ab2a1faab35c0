//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 2 5`.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

use qcartpole::episode::{collect_histograms, run_batch, ControllerBinding, ControllerKind, EnvConfig};
use qcartpole::estimators::{kf_step, EstimatorKind, EstimatorState, FilterOptions, StateEstimator};
use qcartpole::lqr::{solve_gain, weights_for, LqrController, WeightCoordinate};
use qcartpole::measurement::{apply_backaction, outcome_density, sample_outcome, MeasurementConfig, Observable};
use qcartpole::plant::{ClassicalPlant, MeasurementOrder, QuantumPlant, SystemKind};
use qcartpole::quantum::{Grid, GridSpec, Propagator, Wavefunction};
use qcartpole::surrogate::{build_model, calibrate_noise, CalibrationOptions, LinearModel, NoiseModel};
use qcartpole::{Potential, SimParams};

const CALIBRATION_STEPS: u64 = 100_000;
const CALIBRATION_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn potentials() -> [(&'static str, Potential); 3] {
    [
        ("quadratic", Potential::quadratic()),
        ("cosine", Potential::cosine()),
        ("quartic", Potential::quartic()),
    ]
}

type NoiseCache = Mutex<HashMap<(String, u64), Arc<OnceLock<NoiseModel>>>>;

/// Calibrated noise, computed once per potential and pointer width.
fn calibrated(name: &str, potential: Potential, sigma_ancilla: f64) -> NoiseModel {
    static CACHE: OnceLock<NoiseCache> = OnceLock::new();
    let cell = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry((name.to_owned(), sigma_ancilla.to_bits()))
        .or_default()
        .clone();
    *cell.get_or_init(|| {
        let params = SimParams {
            sigma_ancilla,
            ..SimParams::default()
        };
        let opts = CalibrationOptions {
            steps: CALIBRATION_STEPS,
            ..CalibrationOptions::default()
        };
        calibrate_noise(&potential, &params, &opts, CALIBRATION_SEED)
            .expect("calibration succeeds")
            .noise
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

// 1. unitarity and grid convergence

/// Outcome with the Gaussian law of matching mean and variance, driven by
/// a fixed noise draw so that runs on different grids see the same record.
fn gaussian_record_measure(psi: &mut Wavefunction, cfg: &MeasurementConfig, xi: f64) -> f64 {
    let m = psi.moments();
    let (mean, var) = match cfg.observable {
        Observable::Position => (m.mean_x, m.var_x),
        Observable::Momentum => (m.mean_p, m.var_p),
    };
    let lambda = cfg.coupling;
    let q = lambda * mean + (cfg.ancilla_width.powi(2) + lambda * lambda * var).sqrt() * xi;
    apply_backaction(psi, q, cfg).expect("outcome has support");
    q
}

fn controlled_trajectory(potential: &Potential, n_points: usize, steps: usize) -> Vec<[f64; 2]> {
    let params = SimParams::default();
    let grid = Grid::new(GridSpec {
        n_points,
        ..GridSpec::default()
    })
    .unwrap();
    let prop = Propagator::new(&grid, potential, &params);
    let mut psi = Wavefunction::gaussian(&grid, 0.3, 0.2, params.sigma_system).unwrap();
    let model = build_model(potential, &params);
    let mut lqr = LqrController::new(
        *potential,
        &model.a,
        model.b,
        params.mass,
        params.force_max,
        WeightCoordinate::Position,
    )
    .unwrap();
    let px = MeasurementConfig::from_params(&params, Observable::Position).unwrap();
    let pp = MeasurementConfig::from_params(&params, Observable::Momentum).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut out = Vec::with_capacity(steps);
    let mut force = 0.0;
    for _ in 0..steps {
        psi.apply_kick(-params.impulse(force));
        prop.evolve(&mut psi);
        let m = psi.moments();
        out.push([m.mean_x, m.mean_p]);
        gaussian_record_measure(&mut psi, &px, rng.sample(StandardNormal));
        gaussian_record_measure(&mut psi, &pp, rng.sample(StandardNormal));
        let s = Vector2::new(m.mean_x, m.mean_p);
        force = lqr.act(&s, &model.jacobian(&s, 0.0));
    }
    out
}

fn criterion_1() -> Outcome {
    let params = SimParams::default();
    let grid = Grid::new(GridSpec::default()).unwrap();
    let mut worst_norm = 0.0f64;
    let mut worst_grid = 0.0f64;
    for (_, pot) in potentials() {
        let prop = Propagator::new(&grid, &pot, &params);
        let mut psi = Wavefunction::gaussian(&grid, 0.0, 0.0, params.sigma_system).unwrap();
        for _ in 0..10_000 {
            prop.evolve(&mut psi);
            worst_norm = worst_norm.max((psi.norm() - 1.0).abs());
        }
        let coarse = controlled_trajectory(&pot, 512, 1000);
        let fine = controlled_trajectory(&pot, 1024, 1000);
        for (a, b) in coarse.iter().zip(&fine) {
            worst_grid = worst_grid.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    outcome(
        worst_norm < 1e-8 && worst_grid < 1e-4,
        format!("max |norm - 1| = {worst_norm:.2e} (< 1e-8), max 512 vs 1024 moment gap = {worst_grid:.2e} (< 1e-4)"),
    )
}

// 2. weak measurement statistics

fn ks_against_density(samples: &mut [f64], psi: &Wavefunction, cfg: &MeasurementConfig, center: f64, width: f64) -> f64 {
    let (lo, hi) = (center - 12.0 * width, center + 12.0 * width);
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let qs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    let dens: Vec<f64> = qs.iter().map(|&q| outcome_density(psi, cfg, q)).collect();
    let mut cdf = vec![0.0; n + 1];
    for i in 1..=n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let eval = |q: f64| {
        if q <= lo {
            return 0.0;
        }
        if q >= hi {
            return cdf[n];
        }
        let t = (q - lo) / h;
        let i = t.floor() as usize;
        cdf[i] + (t - i as f64) * (cdf[i + 1] - cdf[i])
    };
    samples.sort_by(f64::total_cmp);
    let m = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &q)| {
        let f = eval(q);
        d.max((f - i as f64 / m).abs()).max(((i + 1) as f64 / m - f).abs())
    })
}

fn criterion_2() -> Outcome {
    let params = SimParams::default();
    let grid = Grid::new(GridSpec::default()).unwrap();
    let psi = Wavefunction::gaussian(&grid, 1.3, 0.4, params.sigma_system).unwrap();
    let m = psi.moments();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (obs, mean, var) in [
        (Observable::Position, m.mean_x, m.var_x),
        (Observable::Momentum, m.mean_p, m.var_p),
    ] {
        let cfg = MeasurementConfig::from_params(&params, obs).unwrap();
        let outcomes: Vec<_> = (0..n).map(|_| sample_outcome(&psi, &cfg, &mut rng)).collect();
        let scaled: Vec<f64> = outcomes.iter().map(|o| o.q_scaled).collect();
        let mut raw: Vec<f64> = outcomes.iter().map(|o| o.q_raw).collect();
        let (q_mean, q_var) = mean_var(&scaled);
        let z = (q_mean - mean) / (q_var / n as f64).sqrt();
        let (_, raw_var) = mean_var(&raw);
        let lambda = cfg.coupling;
        let factor = (raw_var - lambda * lambda * var) / cfg.ancilla_width.powi(2);
        let width = (cfg.ancilla_width.powi(2) + lambda * lambda * var).sqrt();
        let ks = ks_against_density(&mut raw, &psi, &cfg, lambda * mean, width);
        pass &= z.abs() <= 3.0 && ks < 0.01;
        parts.push(format!(
            "{}: |z| = {:.2} (<= 3), KS = {ks:.4} (< 0.01), pointer variance = {factor:.3} sigma^2",
            obs.name(),
            z.abs()
        ));
    }
    outcome(pass, parts.join("; "))
}

// 3. strong measurement limit

fn criterion_3() -> Outcome {
    let grid = Grid::new(GridSpec::default()).unwrap();
    let psi = Wavefunction::gaussian(&grid, 0.5, -0.3, 1.2).unwrap();
    let target = psi.moments().var_x;
    let cfg = MeasurementConfig::new(1.0, 1e-3, Observable::Position).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let qs: Vec<f64> = (0..100_000).map(|_| sample_outcome(&psi, &cfg, &mut rng).q_raw).collect();
    let (_, var) = mean_var(&qs);
    let rel = (var / target - 1.0).abs();
    outcome(
        rel < 0.02,
        format!("Var(q) = {var:.4}, Var_psi(x) = {target:.4}, relative gap {:.2}% (< 2%)", 100.0 * rel),
    )
}

// 4. Kalman optimality

/// Smoothing-free batch estimate of the last state by weighted least
/// squares over the whole trajectory.
fn batch_last_state(
    model: &LinearModel,
    prior: &EstimatorState,
    q: &Matrix2<f64>,
    r: &Matrix2<f64>,
    ys: &[Vector2<f64>],
    us: &[f64],
) -> (Vector2<f64>, Matrix2<f64>) {
    let t = ys.len();
    let dim = 2 * (t + 1);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut g = DVector::<f64>::zeros(dim);
    let p0i = prior.p.try_inverse().unwrap();
    let qi = q.try_inverse().unwrap();
    let ri = r.try_inverse().unwrap();
    let add_block = |h: &mut DMatrix<f64>, i: usize, j: usize, m: &Matrix2<f64>| {
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * i + a, 2 * j + b)] += m[(a, b)];
            }
        }
    };
    add_block(&mut h, 0, 0, &p0i);
    let v = p0i * prior.s_hat;
    g[0] += v[0];
    g[1] += v[1];
    for k in 1..=t {
        // transition residual s_k - A s_{k-1} - B u_k
        let a = model.a;
        let bu = model.b * us[k - 1];
        add_block(&mut h, k, k, &qi);
        add_block(&mut h, k - 1, k - 1, &(a.transpose() * qi * a));
        add_block(&mut h, k, k - 1, &(-qi * a));
        add_block(&mut h, k - 1, k, &(-a.transpose() * qi));
        let gk = qi * bu;
        let gk1 = -a.transpose() * qi * bu;
        // observation residual y_k - C s_k
        let c = model.c;
        add_block(&mut h, k, k, &(c.transpose() * ri * c));
        let gy = c.transpose() * ri * ys[k - 1];
        g[2 * k] += gk[0] + gy[0];
        g[2 * k + 1] += gk[1] + gy[1];
        g[2 * k - 2] += gk1[0];
        g[2 * k - 1] += gk1[1];
    }
    let cov = h.try_inverse().unwrap();
    let x = &cov * g;
    let last = Vector2::new(x[2 * t], x[2 * t + 1]);
    let p = Matrix2::new(
        cov[(2 * t, 2 * t)],
        cov[(2 * t, 2 * t + 1)],
        cov[(2 * t + 1, 2 * t)],
        cov[(2 * t + 1, 2 * t + 1)],
    );
    (last, p)
}

fn criterion_4() -> Outcome {
    let params = SimParams::default();
    let model = build_model(&Potential::quadratic(), &params);

    // a: recursive filter against the batch solution
    let q = Matrix2::new(0.04, 0.01, 0.01, 0.05);
    let r = Matrix2::new(4.0, 0.5, 0.5, 3.0);
    let noise = NoiseModel::new(r, q, Matrix2::zeros()).unwrap();
    let sampler = noise.sampler();
    let prior = EstimatorState::prior(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = Vector2::new(0.4, -0.05);
    let (mut ys, mut us) = (Vec::new(), Vec::new());
    let mut est = prior;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u: f64 = rng.random_range(-5.0..5.0);
        let (w, v) = sampler.draw(&mut rng);
        s = model.a * s + model.b * u + w;
        let y = s + v;
        ys.push(y);
        us.push(u);
        est = kf_step(&est, &y, u, &model, &noise).unwrap().state;
        let (mean, cov) = batch_last_state(&model, &prior, &q, &r, &ys, &us);
        worst = worst
            .max(((est.s_hat - mean).abs().component_div(&mean.abs().add_scalar(1.0))).max())
            .max(((est.p - cov).abs().component_div(&cov.abs().add_scalar(1.0))).max());
    }
    let part_a = worst < 1e-8;

    // b: decorrelated against naive filtering on calibrated noise
    let noise = calibrated("quadratic", Potential::quadratic(), params.sigma_ancilla);
    let options = FilterOptions::default();
    let mut plant = ClassicalPlant::new(&Potential::quadratic(), &params, &noise).unwrap();
    let mut diffs = Vec::new();
    let (mut mse_naive, mut mse_decorr) = (0.0, 0.0);
    for episode in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + episode);
        plant.reset(&mut rng);
        let mut naive = StateEstimator::new(EstimatorKind::Kalman, model, noise, 1, prior, options).unwrap();
        let mut decorr =
            StateEstimator::new(EstimatorKind::KalmanDecorrelated, model, noise, 1, prior, options).unwrap();
        let (mut a, mut b, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            let u = rng.random_range(-params.force_max..=params.force_max);
            let step = plant.step(u, &mut rng).unwrap();
            a += (naive.step(&step.y, u).unwrap().state.s_hat - step.truth).norm_squared();
            b += (decorr.step(&step.y, u).unwrap().state.s_hat - step.truth).norm_squared();
            n += 1.0;
            if step.terminated {
                break;
            }
        }
        mse_naive += a / n / 1000.0;
        mse_decorr += b / n / 1000.0;
        diffs.push(a / n - b / n);
    }
    let (d_mean, d_var) = mean_var(&diffs);
    let t = d_mean / (d_var / diffs.len() as f64).sqrt();
    let critical = StudentsT::new(0.0, 1.0, (diffs.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    let part_b = t > critical;
    outcome(
        part_a && part_b,
        format!(
            "filter vs batch worst relative gap {worst:.1e} (< 1e-8); MSE naive {mse_naive:.4} vs decorrelated {mse_decorr:.4}, paired t = {t:.1} (> {critical:.2})"
        ),
    )
}

// 5. LQR against dynamic programming

fn dp_gain(a: &Matrix2<f64>, b: &Vector2<f64>, w1: &Matrix2<f64>, horizon: usize) -> nalgebra::RowVector2<f64> {
    let mut p = *w1;
    let mut k = nalgebra::RowVector2::zeros();
    for _ in 0..horizon {
        let bpb = (b.transpose() * p * b)[0];
        k = (b.transpose() * p * a) / bpb;
        let closed = a - b * k;
        p = w1 + closed.transpose() * p * closed;
        p = (p + p.transpose()) * 0.5;
    }
    k
}

fn criterion_5() -> Outcome {
    let params = SimParams::default();
    let mut worst = 0.0f64;
    let mut exact = true;
    let mut near = 0.0f64;
    for (_, pot) in potentials() {
        let model = build_model(&pot, &params);
        for x in [0.0, 1.5] {
            let s = Vector2::new(x, 0.0);
            let a = model.jacobian(&s, 0.0);
            let w = weights_for(&pot, &s, params.mass, WeightCoordinate::Position);
            let gain = solve_gain(&a, &model.b, &w, None).unwrap();
            if matches!(pot, Potential::Quadratic { .. }) {
                let dp = dp_gain(&a, &model.b, &w.w1, 1000);
                worst = worst.max(((gain.k - dp).abs().component_div(&dp.abs())).max());
            }
            for c in [0.25, 4.0, 1024.0] {
                let mut scaled = w;
                scaled.w1 *= c;
                exact &= solve_gain(&a, &model.b, &scaled, None).unwrap().k == gain.k;
            }
            let mut scaled = w;
            scaled.w1 *= 3.7;
            let k = solve_gain(&a, &model.b, &scaled, None).unwrap().k;
            near = near.max(((k - gain.k).abs().component_div(&gain.k.abs())).max());
        }
    }
    outcome(
        worst < 1e-6 && exact && near < 1e-9,
        format!(
            "quadratic gain vs 1000-step DP relative gap {worst:.1e} (< 1e-6); K(cW1) == K(W1) bitwise for c in {{1/4, 4, 1024}}: {exact}; c = 3.7 gap {near:.1e} (< 1e-9)"
        ),
    )
}

// 6. measurement-count trade-off on the classical surrogate

const NMEAS: [usize; 7] = [1, 2, 4, 8, 16, 32, 48];

fn classical_sweep(noise: NoiseModel, params: SimParams, estimator: EstimatorKind) -> Vec<f64> {
    NMEAS
        .iter()
        .map(|&n| {
            let binding = ControllerBinding::new(ControllerKind::Lqr, estimator, n);
            let cfg =
                EnvConfig::new(SystemKind::Classical, Potential::quadratic(), params, binding).with_noise(noise);
            run_batch(&cfg, 1000, 6, workers()).unwrap().summary.mean
        })
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    (0..xs.len()).fold(0, |best, i| if xs[i] > xs[best] { i } else { best })
}

fn criterion_6() -> Outcome {
    let params = SimParams {
        sigma_ancilla: 0.8,
        ..SimParams::default()
    };
    let noise = calibrated("quadratic", Potential::quadratic(), 0.8);
    let bare = classical_sweep(noise, params, EstimatorKind::None);
    let filtered = classical_sweep(noise, params, EstimatorKind::KalmanDecorrelated);
    let peak = argmax(&bare);
    let interior = peak != 0 && peak != NMEAS.len() - 1;
    let single = filtered.iter().all(|&m| filtered[0] >= m);
    let fmt = |xs: &[f64]| {
        NMEAS
            .iter()
            .zip(xs)
            .map(|(n, m)| format!("{n}:{m:.0}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        interior && single,
        format!(
            "(a) no estimator [{}] peak at N={} interior: {interior}; (b) Kalman [{}] N=1 is maximal: {single}",
            fmt(&bare),
            NMEAS[peak],
            fmt(&filtered)
        ),
    )
}

// 7. quantum threshold point

fn criterion_7() -> Outcome {
    let params = SimParams::default();
    let noise = calibrated("quadratic", Potential::quadratic(), params.sigma_ancilla);
    let binding = ControllerBinding::new(ControllerKind::Lqr, EstimatorKind::KalmanDecorrelated, 1);
    let cfg = EnvConfig::new(SystemKind::Quantum, Potential::quadratic(), params, binding).with_noise(noise);
    let report = run_batch(&cfg, 200, 7, workers()).unwrap();
    let s = report.summary;
    outcome(
        s.mean >= 1000.0 && s.episodes >= 200,
        format!(
            "mean t_termination {:.0} ± {:.0} over {} episodes (>= 1000), {:.0}% reached the step limit, {} aborted",
            s.mean,
            s.std_error,
            s.episodes,
            100.0 * s.censored_fraction,
            s.aborted
        ),
    )
}

// 8. position histograms under LQGC

fn criterion_8() -> Outcome {
    let params = SimParams::default();
    let mut stats = Vec::new();
    for (name, pot) in potentials() {
        let noise = calibrated(name, pot, params.sigma_ancilla);
        let binding = ControllerBinding::new(ControllerKind::Lqr, EstimatorKind::KalmanDecorrelated, 1);
        let cfg = EnvConfig::new(SystemKind::Quantum, pot, params, binding).with_noise(noise);
        let h = collect_histograms(&cfg, 100_000, 300, 8, workers()).unwrap();
        stats.push((name, h.position.mean(), h.position.skewness(), h.position.iqr()));
    }
    let (_, q_mean, q_skew, q_iqr) = stats[0];
    let (_, _, _, c_iqr) = stats[1];
    let (_, _, _, k_iqr) = stats[2];
    let pass = q_mean.abs() <= 0.5 && q_skew.abs() < 0.3 && c_iqr > q_iqr && k_iqr < c_iqr;
    let detail = stats
        .iter()
        .map(|(n, m, s, i)| format!("{n}: mean {m:.3} skew {s:.3} IQR {i:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

// 9. surrogate one-step fidelity

fn criterion_9() -> Outcome {
    let params = SimParams::default();
    let pot = Potential::quadratic();
    let noise = calibrated("quadratic", pot, params.sigma_ancilla);
    let model = build_model(&pot, &params);
    let sampler = noise.sampler();
    let mut plant = QuantumPlant::new(&pot, &params, GridSpec::default(), MeasurementOrder::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut surrogate_rng = ChaCha8Rng::seed_from_u64(90);
    let burn_in = CalibrationOptions::default().burn_in;
    let (mut quantum, mut surrogate) = (Vec::new(), Vec::new());
    while quantum.len() < 20_000 {
        plant.reset(&mut rng).unwrap();
        let mut prev: Option<Vector2<f64>> = None;
        for t in 0..10_000u64 {
            let u = rng.random_range(-params.force_max..=params.force_max);
            let step = match plant.step(u, &mut rng) {
                Ok(s) => s,
                Err(_) => break,
            };
            if let Some(s) = prev {
                quantum.push(step.truth - s);
                let (w, _) = sampler.draw(&mut surrogate_rng);
                surrogate.push(model.step_mean(&s, u) + w - s);
            }
            if step.terminated {
                break;
            }
            prev = (t >= burn_in).then_some(step.truth);
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, label) in [(0, "dx"), (1, "dp")] {
        let q: Vec<f64> = quantum.iter().map(|d| d[i]).collect();
        let s: Vec<f64> = surrogate.iter().map(|d| d[i]).collect();
        let (qm, qv) = mean_var(&q);
        let (sm, _) = mean_var(&s);
        let q2 = q.iter().map(|v| v * v).sum::<f64>() / q.len() as f64;
        let s2 = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        let first = (qm - sm).abs() / qv.sqrt();
        let second = (s2 / q2 - 1.0).abs();
        pass &= first < 0.05 && second < 0.05;
        parts.push(format!(
            "{label}: mean gap {:.2}% of sd, second moment gap {:.2}%",
            100.0 * first,
            100.0 * second
        ));
    }
    outcome(pass, format!("{} samples; {} (both < 5%)", quantum.len(), parts.join("; ")))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "unitarity and grid convergence", Duration::from_secs(60), criterion_1),
        (2, "weak measurement statistics", Duration::from_secs(60), criterion_2),
        (3, "strong measurement limit", Duration::from_secs(60), criterion_3),
        (4, "Kalman optimality", Duration::from_secs(300), criterion_4),
        (5, "LQR against dynamic programming", Duration::from_secs(60), criterion_5),
        (6, "measurement-count trade-off", Duration::from_secs(1800), criterion_6),
        (7, "quantum threshold point", Duration::from_secs(1800), criterion_7),
        (8, "LQGC position histograms", Duration::from_secs(1800), criterion_8),
        (9, "surrogate fidelity", Duration::from_secs(600), criterion_9),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} {}: {name}: {detail} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
