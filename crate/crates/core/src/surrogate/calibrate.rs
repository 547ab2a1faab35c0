//! Noise extraction from the quantum simulator.

use nalgebra::{Matrix2, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_model, NoiseModel};
use crate::error::{Error, Result};
use crate::params::{Potential, SimParams};
use crate::plant::{MeasurementOrder, QuantumPlant};
use crate::quantum::GridSpec;
use crate::stats::Covariance;

pub const MIN_CALIBRATION_STEPS: u64 = 10_000;
const MIN_RETAINED: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    /// Retained (w, v) samples to collect.
    pub steps: u64,
    /// Leading steps of every episode that are discarded.
    pub burn_in: u64,
    /// Independent random streams; results do not depend on the thread count.
    pub shards: usize,
    /// Episodes are cut after this many steps even if they survive.
    pub max_episode_steps: u64,
    pub grid: GridSpec,
    pub order: MeasurementOrder,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            steps: 1_000_000,
            burn_in: 300,
            shards: 16,
            max_episode_steps: 10_000,
            grid: GridSpec::default(),
            order: MeasurementOrder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub noise: NoiseModel,
    pub samples: u64,
    pub episodes: u64,
    /// Sample means of (w, v); near zero for an unbiased model.
    pub mean: Vector4<f64>,
}

#[derive(Default)]
struct Shard {
    acc: Covariance<4>,
    episodes: u64,
}

/// Runs the quantum loop under uniformly random forces and returns the
/// joint covariance of the process noise `w_t = s_{t+1} − f(s_t, u_{t+1})`
/// and the measurement noise `v_t = y_t − s_t`, with `s_t` the
/// pre-measurement expectation values.
pub fn calibrate_noise(
    potential: &Potential,
    params: &SimParams,
    options: &CalibrationOptions,
    seed: u64,
) -> Result<CalibrationReport> {
    if options.steps < MIN_CALIBRATION_STEPS {
        return Err(Error::config(format!(
            "calibration needs at least {MIN_CALIBRATION_STEPS} steps, got {}",
            options.steps
        )));
    }
    if options.shards == 0 {
        return Err(Error::config("calibration needs at least one shard"));
    }
    if options.max_episode_steps <= options.burn_in + 1 {
        return Err(Error::config("max_episode_steps must exceed the burn-in"));
    }
    let plant = QuantumPlant::new(potential, params, options.grid, options.order)?;

    let shards = options.shards as u64;
    let quotas: Vec<(u64, u64)> = (0..shards)
        .map(|i| (i, options.steps / shards + u64::from(i < options.steps % shards)))
        .collect();
    let results: Vec<Result<Shard>> = quotas
        .into_par_iter()
        .map(|(index, quota)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index);
            run_shard(plant.clone(), potential, params, options, quota, &mut rng)
        })
        .collect();

    let mut total = Shard::default();
    for shard in results {
        let shard = shard?;
        total.acc.merge(&shard.acc);
        total.episodes += shard.episodes;
    }
    if total.acc.count() < MIN_RETAINED {
        return Err(Error::Calibration(format!(
            "only {} samples retained after burn-in",
            total.acc.count()
        )));
    }
    let joint = total.acc.covariance();
    let process: Matrix2<f64> = joint.fixed_view::<2, 2>(0, 0).into();
    let cross: Matrix2<f64> = joint.fixed_view::<2, 2>(0, 2).into();
    let measurement: Matrix2<f64> = joint.fixed_view::<2, 2>(2, 2).into();
    let noise = NoiseModel::new(measurement, process, cross).map_err(|e| Error::Calibration(e.to_string()))?;
    log::info!(
        "calibrated {} samples over {} episodes ({potential:?})",
        total.acc.count(),
        total.episodes
    );
    Ok(CalibrationReport {
        noise,
        samples: total.acc.count(),
        episodes: total.episodes,
        mean: total.acc.mean(),
    })
}

fn run_shard(
    mut plant: QuantumPlant,
    potential: &Potential,
    params: &SimParams,
    options: &CalibrationOptions,
    quota: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Shard> {
    let model = build_model(potential, params);
    let mut shard = Shard::default();
    // an episode that never gets past the burn-in would spin forever
    let mut barren = 0u32;
    while shard.acc.count() < quota {
        plant.reset(rng)?;
        shard.episodes += 1;
        let before = shard.acc.count();
        let mut prev: Option<(Vector2<f64>, Vector2<f64>)> = None;
        for t in 0..options.max_episode_steps {
            let u = rng.random_range(-params.force_max..=params.force_max);
            let step = plant.step(u, rng)?;
            if let Some((s, v)) = prev {
                let w = step.truth - model.step_mean(&s, u);
                shard.acc.push(&Vector4::new(w[0], w[1], v[0], v[1]));
                if shard.acc.count() >= quota {
                    break;
                }
            }
            if step.terminated {
                break;
            }
            prev = (t >= options.burn_in).then(|| (step.truth, step.y - step.truth));
        }
        if shard.acc.count() == before {
            barren += 1;
            if barren > 10_000 {
                return Err(Error::Calibration(
                    "episodes terminate before the burn-in ends under random forcing".into(),
                ));
            }
        } else {
            barren = 0;
        }
    }
    Ok(shard)
}
