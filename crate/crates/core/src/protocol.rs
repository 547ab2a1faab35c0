//! Line-delimited JSON sessions that let an external agent act as the
//! controller or as the state estimator.
//!
//! Every line carries one object with a `kind` field. The client opens with
//! `hello`, starts episodes with `reset` and answers every `obs` with
//! exactly one `act`. The server answers `act` with a `reward` followed by
//! either the next `obs` or a `done`. Any malformed or out-of-sequence line
//! gets an `error` reply and ends the session.
//!
//! ```text
//! > {"kind":"hello","version":1}
//! < {"kind":"hello","version":1,"mode":"controller","obs_size":2,"action_size":1,"force_max":25.13,"n_meas":1}
//! > {"kind":"reset"}
//! < {"kind":"obs","t":1,"obs":[3.1,-12.7]}
//! > {"kind":"act","action":[1e6]}
//! < {"kind":"reward","reward":0.0,"clamped":true,"force":25.13}
//! < {"kind":"obs","t":2,"obs":[-8.2,4.4]}
//! ```

use std::io::{BufRead, Read, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::str::FromStr;

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{controller_rng, plant_rng, Block, EnvConfig, Environment, Termination};
use crate::error::{Error, Result};
use crate::estimators::{prediction_error, EstimatorState, StateEstimator};
use crate::surrogate::LinearModel;

pub const PROTOCOL_VERSION: u32 = 1;
/// Longest accepted request line in bytes.
pub const MAX_LINE: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    /// The agent chooses the force.
    #[default]
    Controller,
    /// The agent tracks the state while a random controller drives the plant.
    Estimator,
}

/// What a controller-mode observation contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsSource {
    /// Averaged measurement outcomes `(x̄, p̄)`.
    #[default]
    Raw,
    /// Server-side filter estimate `(x̂, p̂)`.
    Estimate,
    /// `(x̄, p̄, x̂, p̂)`.
    Both,
}

impl FromStr for SessionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "controller" => Ok(SessionMode::Controller),
            "estimator" => Ok(SessionMode::Estimator),
            other => Err(Error::config(format!("unknown session mode `{other}`"))),
        }
    }
}

impl FromStr for ObsSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ObsSource::Raw),
            "estimate" => Ok(ObsSource::Estimate),
            "both" => Ok(ObsSource::Both),
            other => Err(Error::config(format!("unknown observation source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub env: EnvConfig,
    pub mode: SessionMode,
    pub obs_source: ObsSource,
    /// Master seed; `reset` without arguments walks through its episodes.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        version: u32,
    },
    Reset {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        episode: Option<u64>,
    },
    Act {
        action: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerMessage {
    Hello {
        version: u32,
        mode: SessionMode,
        obs_size: usize,
        action_size: usize,
        force_max: f64,
        n_meas: usize,
    },
    Obs {
        /// Inner steps elapsed.
        t: u64,
        obs: Vec<f64>,
    },
    Reward {
        reward: f64,
        clamped: bool,
        /// Force that was actually applied.
        force: f64,
    },
    Done {
        terminated_by: Termination,
        t_termination: u64,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Greeting,
    Idle,
    Acting,
}

/// Transport-independent state of one session.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    model: LinearModel,
    env: Environment,
    filter: Option<StateEstimator>,
    rng: ChaCha8Rng,
    phase: Phase,
    next_episode: u64,
    // estimator mode: the agent's latest estimate and the force of the
    // block it has not yet seen the consequences of
    s_hat: Vector2<f64>,
    force: f64,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        let env = Environment::new(&config.env, plant_rng(config.seed, 0))?;
        let b = &config.env.binding;
        let filter = match config.obs_source {
            ObsSource::Raw => None,
            _ if config.mode == SessionMode::Estimator => None,
            _ => {
                if !b.estimator.is_filter() {
                    return Err(Error::config(format!(
                        "observing the estimate needs a filter estimator, not '{}'",
                        b.estimator
                    )));
                }
                let noise = config.env.noise.ok_or_else(|| Error::config("a filter needs a noise model"))?;
                Some(StateEstimator::new(
                    b.estimator,
                    config.env.model(),
                    noise,
                    b.n_meas,
                    EstimatorState::prior(&config.env.params),
                    config.env.options.filter,
                )?)
            }
        };
        Ok(Self {
            model: config.env.model(),
            env,
            filter,
            rng: controller_rng(config.seed, 0),
            phase: Phase::Greeting,
            next_episode: 0,
            s_hat: Vector2::zeros(),
            force: 0.0,
            config,
        })
    }

    pub fn obs_size(&self) -> usize {
        match (self.config.mode, self.config.obs_source) {
            (SessionMode::Estimator, _) => 5,
            (_, ObsSource::Both) => 4,
            _ => 2,
        }
    }

    pub fn action_size(&self) -> usize {
        match self.config.mode {
            SessionMode::Controller => 1,
            SessionMode::Estimator => 2,
        }
    }

    /// Replies to one request line. The session is over once the reply
    /// contains an `error`.
    pub fn handle_line(&mut self, line: &str) -> Vec<ServerMessage> {
        let message = match serde_json::from_str::<ClientMessage>(line) {
            Ok(m) => m,
            Err(e) => return vec![error(format!("malformed message: {e}"))],
        };
        match self.handle(message) {
            Ok(replies) => replies,
            Err(e) => vec![error(e.to_string())],
        }
    }

    pub fn handle(&mut self, message: ClientMessage) -> Result<Vec<ServerMessage>> {
        match (self.phase, message) {
            (Phase::Greeting, ClientMessage::Hello { version }) => {
                if version != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!(
                        "unsupported protocol version {version} (server speaks {PROTOCOL_VERSION})"
                    )));
                }
                self.phase = Phase::Idle;
                Ok(vec![ServerMessage::Hello {
                    version: PROTOCOL_VERSION,
                    mode: self.config.mode,
                    obs_size: self.obs_size(),
                    action_size: self.action_size(),
                    force_max: self.config.env.params.force_max,
                    n_meas: self.env.n_meas(),
                }])
            }
            (Phase::Greeting, _) => Err(Error::Protocol("expected hello".into())),
            (_, ClientMessage::Hello { .. }) => Err(Error::Protocol("duplicate hello".into())),
            (_, ClientMessage::Reset { seed, episode }) => self.reset(seed, episode),
            (Phase::Acting, ClientMessage::Act { action }) => self.act(&action),
            (Phase::Idle, ClientMessage::Act { .. }) => Err(Error::Protocol("act without a pending obs".into())),
        }
    }

    fn reset(&mut self, seed: Option<u64>, episode: Option<u64>) -> Result<Vec<ServerMessage>> {
        let seed = seed.unwrap_or(self.config.seed);
        let episode = episode.unwrap_or(self.next_episode);
        self.next_episode = episode.wrapping_add(1);
        self.env.reset_with(Some(plant_rng(seed, episode)))?;
        self.rng = controller_rng(seed, episode);
        if let Some(f) = &mut self.filter {
            f.reset();
        }
        self.s_hat = Vector2::zeros();
        self.force = match self.config.mode {
            SessionMode::Controller => 0.0,
            SessionMode::Estimator => self.random_force(),
        };
        let block = self.env.advance(self.force)?;
        let mut out = Vec::with_capacity(1);
        self.after_block(&block, &mut out)?;
        Ok(out)
    }

    fn act(&mut self, action: &[f64]) -> Result<Vec<ServerMessage>> {
        if action.len() != self.action_size() {
            return Err(Error::Protocol(format!(
                "action has {} entries, expected {}",
                action.len(),
                self.action_size()
            )));
        }
        let mut out = Vec::with_capacity(2);
        match self.config.mode {
            SessionMode::Controller => {
                let block = self.env.advance(action[0])?;
                let reward = if block.termination == Some(Termination::Threshold) {
                    -1.0
                } else {
                    0.0
                };
                out.push(ServerMessage::Reward {
                    reward,
                    clamped: block.clamped,
                    force: block.force,
                });
                self.after_block(&block, &mut out)?;
            }
            SessionMode::Estimator => {
                let delta = Vector2::new(action[0], action[1]);
                if !delta.iter().all(|v| v.is_finite()) {
                    return Err(Error::Protocol("estimate update must be finite".into()));
                }
                let previous = self.s_hat + delta;
                self.s_hat = previous;
                self.force = self.random_force();
                let block = self.env.advance(self.force)?;
                let e = prediction_error(
                    &self.model,
                    self.config.env.options.filter.prediction_error,
                    &previous,
                    &block.y,
                    block.force,
                    block.steps.len(),
                );
                out.push(ServerMessage::Reward {
                    reward: -e.norm_squared(),
                    clamped: false,
                    force: block.force,
                });
                self.after_block(&block, &mut out)?;
            }
        }
        Ok(out)
    }

    fn after_block(&mut self, block: &Block, out: &mut Vec<ServerMessage>) -> Result<()> {
        if let Some(terminated_by) = block.termination {
            self.phase = Phase::Idle;
            out.push(ServerMessage::Done {
                terminated_by,
                t_termination: self.env.time(),
            });
            return Ok(());
        }
        let y = block.y;
        let obs = match self.config.mode {
            SessionMode::Estimator => vec![self.s_hat[0], self.s_hat[1], y[0], y[1], block.force],
            SessionMode::Controller => {
                let estimate = match &mut self.filter {
                    Some(f) => Some(f.step(&y, block.force)?.state.s_hat),
                    None => None,
                };
                match (self.config.obs_source, estimate) {
                    (ObsSource::Estimate, Some(s)) => vec![s[0], s[1]],
                    (ObsSource::Both, Some(s)) => vec![y[0], y[1], s[0], s[1]],
                    _ => vec![y[0], y[1]],
                }
            }
        };
        self.phase = Phase::Acting;
        out.push(ServerMessage::Obs {
            t: self.env.time(),
            obs,
        });
        Ok(())
    }

    fn random_force(&mut self) -> f64 {
        let f = self.config.env.params.force_max;
        self.rng.random_range(-f..=f)
    }
}

fn error(message: String) -> ServerMessage {
    ServerMessage::Error { message }
}

fn send<W: Write>(writer: &mut W, message: &ServerMessage) -> std::io::Result<()> {
    let mut line = serde_json::to_string(message).map_err(std::io::Error::other)?;
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    writer.flush()
}

/// Serves one session until end of stream or the first error reply.
/// Returns the number of request lines handled.
pub fn serve_stream<R: BufRead, W: Write>(mut reader: R, mut writer: W, config: SessionConfig) -> Result<u64> {
    let mut session = Session::new(config)?;
    let mut buf = Vec::new();
    let mut handled = 0;
    loop {
        buf.clear();
        let n = Read::take(reader.by_ref(), MAX_LINE as u64 + 1).read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(handled);
        }
        handled += 1;
        let replies = if buf.len() > MAX_LINE && !buf.ends_with(b"\n") {
            vec![error(format!("line longer than {MAX_LINE} bytes"))]
        } else {
            match std::str::from_utf8(&buf) {
                Ok(text) if text.trim().is_empty() => continue,
                Ok(text) => session.handle_line(text.trim()),
                Err(_) => vec![error("line is not valid UTF-8".into())],
            }
        };
        for reply in &replies {
            send(&mut writer, reply)?;
        }
        if replies.iter().any(|r| matches!(r, ServerMessage::Error { .. })) {
            return Ok(handled);
        }
    }
}

/// Accepts TCP connections and serves each on its own thread. Connection
/// `k` uses master seed `seed + k`. Stops after `max_sessions` connections
/// when given.
pub fn serve_tcp<A: ToSocketAddrs>(addr: A, config: SessionConfig, max_sessions: Option<u64>) -> Result<()> {
    let listener = TcpListener::bind(addr)?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_listener(listener, config, max_sessions)
}

pub fn serve_listener(listener: TcpListener, config: SessionConfig, max_sessions: Option<u64>) -> Result<()> {
    // fail before accepting anything if the environment is unusable
    Session::new(config.clone())?;
    let mut handles = Vec::new();
    for (k, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let mut cfg = config.clone();
        cfg.seed = cfg.seed.wrapping_add(k as u64);
        handles.push(std::thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            let reader = match stream.try_clone() {
                Ok(s) => std::io::BufReader::new(s),
                Err(e) => return log::warn!("session {peer:?}: {e}"),
            };
            match serve_stream(reader, stream, cfg) {
                Ok(n) => log::info!("session {peer:?} closed after {n} lines"),
                Err(e) => log::warn!("session {peer:?} failed: {e}"),
            }
        }));
        if max_sessions.is_some_and(|m| k as u64 + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
