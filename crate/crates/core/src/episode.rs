//! The control loop: hold a force for `n_meas` kick/evolve/measure steps,
//! average the outcomes, update the estimator, choose the next force.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorState, FilterOptions, FilterStep, StateEstimator};
use crate::lqr::{LqrController, WeightCoordinate};
use crate::params::{Potential, SimParams};
use crate::plant::{ClassicalPlant, InnerStep, MeasurementOrder, Plant, QuantumPlant, SystemKind};
use crate::quantum::GridSpec;
use crate::stats::{BatchSummary, Histogram};
use crate::surrogate::{build_model, LinearModel, NoiseModel};

pub const DEFAULT_MAX_STEPS: u64 = 10_000;
pub const DEFAULT_BURN_IN: u64 = 300;
pub const HISTOGRAM_BIN: f64 = 0.1;
pub const MOMENTUM_RANGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Lqr,
    Random,
    Zero,
    /// Forces come from an external agent over the protocol.
    Agent,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Lqr => "lqr",
            ControllerKind::Random => "random",
            ControllerKind::Zero => "zero",
            ControllerKind::Agent => "agent",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ControllerKind::Lqr, ControllerKind::Random, ControllerKind::Zero, ControllerKind::Agent]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown controller '{s}'")))
    }
}

/// When the failure condition is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationCheck {
    #[default]
    EveryStep,
    /// Only after the last inner step of each controller decision.
    PerDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBinding {
    pub controller: ControllerKind,
    pub estimator: EstimatorKind,
    pub n_meas: usize,
    pub max_steps: u64,
}

impl ControllerBinding {
    pub fn new(controller: ControllerKind, estimator: EstimatorKind, n_meas: usize) -> Self {
        Self {
            controller,
            estimator,
            n_meas,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopOptions {
    pub order: MeasurementOrder,
    pub termination: TerminationCheck,
    pub filter: FilterOptions,
    pub weight_coordinate: WeightCoordinate,
    pub grid: GridSpec,
}

/// Everything needed to run episodes of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub system: SystemKind,
    pub potential: Potential,
    pub params: SimParams,
    pub binding: ControllerBinding,
    /// Surrogate noise; also the noise model assumed by the filters.
    pub noise: Option<NoiseModel>,
    pub options: LoopOptions,
}

impl EnvConfig {
    pub fn new(system: SystemKind, potential: Potential, params: SimParams, binding: ControllerBinding) -> Self {
        Self {
            system,
            potential,
            params,
            binding,
            noise: None,
            options: LoopOptions::default(),
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.potential.validate()?;
        let b = &self.binding;
        if b.n_meas == 0 {
            return Err(Error::config("n_meas must be at least 1"));
        }
        if b.max_steps == 0 {
            return Err(Error::config("max_steps must be at least 1"));
        }
        if self.noise.is_none() && (self.system == SystemKind::Classical || b.estimator.is_filter()) {
            return Err(Error::config(format!(
                "a noise model is required for the {} system with estimator '{}'",
                self.system, b.estimator
            )));
        }
        Ok(())
    }

    pub fn model(&self) -> LinearModel {
        build_model(&self.potential, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Threshold,
    MaxSteps,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Threshold => "threshold",
            Termination::MaxSteps => "max-steps",
        }
    }
}

/// Outcome of holding one force for up to `n_meas` inner steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Mean of the scaled outcomes of the steps taken.
    pub y: Vector2<f64>,
    pub force: f64,
    /// Whether the requested force exceeded `force_max`.
    pub clamped: bool,
    pub steps: Vec<InnerStep>,
    pub termination: Option<Termination>,
}

/// One plant stepped a controller decision at a time.
#[derive(Debug, Clone)]
pub struct Environment {
    plant: Plant,
    params: SimParams,
    n_meas: usize,
    max_steps: u64,
    check: TerminationCheck,
    rng: ChaCha8Rng,
    t: u64,
    decisions: u64,
    done: Option<Termination>,
}

impl Environment {
    pub fn new(config: &EnvConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let plant = match config.system {
            SystemKind::Quantum => Plant::Quantum(Box::new(QuantumPlant::new(
                &config.potential,
                &config.params,
                config.options.grid,
                config.options.order,
            )?)),
            SystemKind::Classical => {
                let noise = config.noise.as_ref().ok_or_else(|| Error::config("classical system needs a noise model"))?;
                Plant::Classical(ClassicalPlant::new(&config.potential, &config.params, noise)?)
            }
        };
        let mut env = Self {
            plant,
            params: config.params,
            n_meas: config.binding.n_meas,
            max_steps: config.binding.max_steps,
            check: config.options.termination,
            rng,
            t: 0,
            decisions: 0,
            done: None,
        };
        env.reset_with(None)?;
        Ok(env)
    }

    /// Fresh initial state; `rng` replaces the current stream when given.
    pub fn reset_with(&mut self, rng: Option<ChaCha8Rng>) -> Result<()> {
        if let Some(rng) = rng {
            self.rng = rng;
        }
        self.plant.reset(&mut self.rng)?;
        self.t = 0;
        self.decisions = 0;
        self.done = None;
        Ok(())
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    /// Inner steps taken so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn done(&self) -> Option<Termination> {
        self.done
    }

    pub fn advance(&mut self, requested: f64) -> Result<Block> {
        if self.done.is_some() {
            return Err(Error::Protocol("episode already finished".into()));
        }
        let force = if requested.is_nan() {
            0.0
        } else {
            self.params.clamp_force(requested)
        };
        let clamped = requested.is_nan() || force != requested;
        let mut steps = Vec::with_capacity(self.n_meas);
        let mut sum = Vector2::zeros();
        let mut termination = None;
        for i in 0..self.n_meas {
            let step = self.plant.step(force, &mut self.rng)?;
            self.t += 1;
            sum += step.y;
            steps.push(step);
            let last = i + 1 == self.n_meas;
            if step.terminated && (self.check == TerminationCheck::EveryStep || last) {
                termination = Some(Termination::Threshold);
                break;
            }
            if self.t >= self.max_steps {
                termination = Some(Termination::MaxSteps);
                break;
            }
        }
        self.decisions += 1;
        self.done = termination;
        Ok(Block {
            y: sum / steps.len() as f64,
            force,
            clamped,
            steps,
            termination,
        })
    }
}

/// In-process controller with its optional estimator.
#[derive(Debug, Clone)]
pub struct Controller {
    kind: ControllerKind,
    model: LinearModel,
    force_max: f64,
    estimator: Option<StateEstimator>,
    lqr: Option<LqrController>,
    rng: ChaCha8Rng,
    latest: Option<Vector2<f64>>,
}

impl Controller {
    pub fn new(config: &EnvConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let b = &config.binding;
        if b.controller == ControllerKind::Agent || b.estimator == EstimatorKind::Agent {
            return Err(Error::config("agent bindings need a protocol session"));
        }
        let model = config.model();
        let estimator = match (b.estimator.is_filter(), config.noise) {
            (true, Some(noise)) => Some(StateEstimator::new(
                b.estimator,
                model,
                noise,
                b.n_meas,
                EstimatorState::prior(&config.params),
                config.options.filter,
            )?),
            _ => None,
        };
        let lqr = match b.controller {
            ControllerKind::Lqr => Some(LqrController::new(
                config.potential,
                &model.a,
                model.b,
                config.params.mass,
                config.params.force_max,
                config.options.weight_coordinate,
            )?),
            _ => None,
        };
        Ok(Self {
            kind: b.controller,
            model,
            force_max: config.params.force_max,
            estimator,
            lqr,
            rng,
            latest: None,
        })
    }

    pub fn reset(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
        self.latest = None;
        if let Some(e) = &mut self.estimator {
            e.reset();
        }
    }

    /// Feeds the averaged outcome of a finished block to the estimator.
    pub fn observe(&mut self, block: &Block) -> Result<Option<FilterStep>> {
        match &mut self.estimator {
            Some(e) => {
                let step = e.step(&block.y, block.force)?;
                self.latest = Some(step.state.s_hat);
                Ok(Some(step))
            }
            None => {
                self.latest = Some(block.y);
                Ok(None)
            }
        }
    }

    /// State the controller acts on: the filter estimate or the raw average.
    pub fn state(&self) -> Option<Vector2<f64>> {
        self.latest
    }

    pub fn decide(&mut self) -> f64 {
        match self.kind {
            ControllerKind::Zero | ControllerKind::Agent => 0.0,
            ControllerKind::Random => self.rng.random_range(-self.force_max..=self.force_max),
            ControllerKind::Lqr => match (self.latest, &mut self.lqr) {
                (Some(s), Some(lqr)) => {
                    let a = self.model.jacobian(&s, 0.0);
                    lqr.act(&s, &a)
                }
                _ => 0.0,
            },
        }
    }
}

/// One inner step of a recorded episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Inner step index, starting at 1.
    pub t: u64,
    /// Controller decision this step belongs to, starting at 0.
    pub decision: u64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub y_x: f64,
    pub y_p: f64,
    /// Estimate the force was computed from, if any.
    pub s_hat: Option<[f64; 2]>,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: u64,
    pub seed: u64,
    pub t_termination: u64,
    pub terminated_by: Termination,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Random stream of the plant in episode `episode` of a batch.
pub fn plant_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * episode);
    rng
}

/// Random stream of the controller in episode `episode` of a batch.
pub fn controller_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * episode + 1);
    rng
}

pub fn run_episode(config: &EnvConfig, seed: u64, episode: u64, trace: bool) -> Result<EpisodeResult> {
    let mut env = Environment::new(config, plant_rng(seed, episode))?;
    let mut ctl = Controller::new(config, controller_rng(seed, episode))?;
    drive(&mut env, &mut ctl, seed, episode, trace)
}

fn drive(env: &mut Environment, ctl: &mut Controller, seed: u64, episode: u64, trace: bool) -> Result<EpisodeResult> {
    let mut records = trace.then(Vec::new);
    let mut force = 0.0;
    loop {
        let basis = ctl.state();
        let decision = env.decisions();
        let start = env.time();
        let block = env.advance(force)?;
        if let Some(rec) = &mut records {
            for (i, s) in block.steps.iter().enumerate() {
                rec.push(TraceRecord {
                    t: start + i as u64 + 1,
                    decision,
                    mean_x: s.truth[0],
                    mean_p: s.truth[1],
                    y_x: s.y[0],
                    y_p: s.y[1],
                    s_hat: basis.map(|v| [v[0], v[1]]),
                    force: block.force,
                });
            }
        }
        if let Some(terminated_by) = block.termination {
            return Ok(EpisodeResult {
                episode,
                seed,
                t_termination: env.time(),
                terminated_by,
                trace: records,
            });
        }
        ctl.observe(&block)?;
        force = ctl.decide();
    }
}

/// Faults that end one episode without invalidating the batch.
fn is_episode_fault(e: &Error) -> bool {
    matches!(
        e,
        Error::Measurement { .. } | Error::Leakage { .. } | Error::Estimator(_) | Error::Protocol(_)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub summary: BatchSummary,
    /// Termination times of the completed episodes, in episode order.
    pub times: Vec<u64>,
    pub aborted: Vec<u64>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs `episodes` episodes with per-episode streams derived from `seed`.
/// The result does not depend on `workers`.
pub fn run_batch(config: &EnvConfig, episodes: u64, seed: u64, workers: usize) -> Result<BatchReport> {
    if episodes == 0 {
        return Err(Error::config("a batch needs at least one episode"));
    }
    // surface configuration errors before fanning out
    Environment::new(config, plant_rng(seed, 0))?;
    Controller::new(config, controller_rng(seed, 0))?;
    let results: Vec<Result<EpisodeResult>> =
        pool(workers)?.install(|| (0..episodes).into_par_iter().map(|i| run_episode(config, seed, i, false)).collect());
    let mut times = Vec::with_capacity(episodes as usize);
    let mut aborted = Vec::new();
    let mut censored = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(res) => {
                if res.terminated_by == Termination::MaxSteps {
                    censored += 1;
                }
                times.push(res.t_termination);
            }
            Err(e) if is_episode_fault(&e) => {
                log::warn!("episode {i} aborted: {e}");
                aborted.push(i as u64);
            }
            Err(e) => return Err(e),
        }
    }
    if !aborted.is_empty() {
        log::warn!("{} of {episodes} episodes aborted and excluded", aborted.len());
    }
    Ok(BatchReport {
        summary: BatchSummary::from_times(&times, censored, aborted.len()),
        times,
        aborted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub position: Histogram,
    pub momentum: Histogram,
    pub episodes: u64,
    pub retained: u64,
}

const HISTOGRAM_CHUNK: u64 = 32;

/// Accumulates the true position and momentum of every inner step after
/// `burn_in`, concatenating episodes until `total_steps` samples are kept.
pub fn collect_histograms(
    config: &EnvConfig,
    total_steps: u64,
    burn_in: u64,
    seed: u64,
    workers: usize,
) -> Result<HistogramPair> {
    if total_steps == 0 {
        return Err(Error::config("histograms need at least one retained step"));
    }
    Environment::new(config, plant_rng(seed, 0))?;
    Controller::new(config, controller_rng(seed, 0))?;
    let x_th = config.params.x_threshold;
    let mut out = HistogramPair {
        position: Histogram::new(-x_th, x_th, HISTOGRAM_BIN),
        momentum: Histogram::new(-MOMENTUM_RANGE, MOMENTUM_RANGE, HISTOGRAM_BIN),
        episodes: 0,
        retained: 0,
    };
    let pool = pool(workers)?;
    let mut next = 0u64;
    let mut idle_chunks = 0;
    while out.retained < total_steps {
        let chunk: Vec<Result<EpisodeResult>> = pool.install(|| {
            (next..next + HISTOGRAM_CHUNK)
                .into_par_iter()
                .map(|i| run_episode(config, seed, i, true))
                .collect()
        });
        next += HISTOGRAM_CHUNK;
        let before = out.retained;
        for r in chunk {
            let res = match r {
                Ok(res) => res,
                Err(e) if is_episode_fault(&e) => {
                    log::warn!("histogram episode aborted: {e}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            if out.retained >= total_steps {
                break;
            }
            out.episodes += 1;
            for rec in res.trace.unwrap_or_default() {
                if rec.t <= burn_in {
                    continue;
                }
                out.position.push(rec.mean_x);
                out.momentum.push(rec.mean_p);
                out.retained += 1;
                if out.retained >= total_steps {
                    break;
                }
            }
        }
        idle_chunks = if out.retained == before { idle_chunks + 1 } else { 0 };
        if idle_chunks >= 100 {
            return Err(Error::config(format!("no episode outlives the burn-in of {burn_in} steps")));
        }
    }
    Ok(out)
}
