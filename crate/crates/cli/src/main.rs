use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use qcartpole::bench::{self, BenchmarkConfig, PotentialSpec};
use qcartpole::episode::{ControllerKind, DEFAULT_BURN_IN};
use qcartpole::estimators::EstimatorKind;
use qcartpole::plant::SystemKind;
use qcartpole::protocol::{self, ObsSource, SessionConfig, SessionMode};
use qcartpole::surrogate::{calibrate_noise, write_artifact, CalibrationOptions, NoiseArtifact};
use qcartpole::{Potential, PotentialKind, SimParams};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "qcartpole", version, about = "Quantum cartpole control benchmarks")]
struct Cli {
    /// Worker threads for episode batches (default: all cores).
    #[arg(long, global = true, env = "QCARTPOLE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean termination time over an N_meas × sigma_ancilla grid.
    Sweep {
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cell-wise ratio of a sweep against a baseline sweep.
    Ratio {
        #[command(flatten)]
        bench: BenchArgs,
        /// Baseline config file; otherwise the subject with the overrides below.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value = "lqr")]
        baseline_controller: ControllerKind,
        #[arg(long, default_value = "kf-decorr")]
        baseline_estimator: EstimatorKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the classical surrogate noise model to the quantum simulator.
    Calibrate {
        #[arg(long, default_value = "quadratic")]
        potential: PotentialKind,
        #[arg(long)]
        sigma_ancilla: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Position and momentum histograms of controlled episodes.
    Histogram {
        #[command(flatten)]
        bench: BenchArgs,
        /// Retained inner steps.
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Expose the environment to an external agent.
    Serve {
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long, default_value = "controller")]
        mode: SessionMode,
        #[arg(long, default_value = "raw")]
        obs_source: ObsSource,
        #[arg(long, conflicts_with = "port")]
        stdio: bool,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Exit after this many connections.
        #[arg(long)]
        max_sessions: Option<u64>,
    },
}

/// Flags shared by the benchmark commands. Given flags override the
/// values of `--config`.
#[derive(Args, Default)]
struct BenchArgs {
    /// Benchmark config or run manifest (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<SystemKind>,
    #[arg(long)]
    potential: Option<PotentialKind>,
    #[arg(long)]
    controller: Option<ControllerKind>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long, value_delimiter = ',')]
    nmeas: Option<Vec<usize>>,
    #[arg(long, alias = "sigma-meas", value_delimiter = ',')]
    sigma_ancilla: Option<Vec<f64>>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Calibrated noise artifact; repeatable.
    #[arg(long = "noise")]
    noise: Vec<PathBuf>,
    /// Calibrate missing noise models on the fly with this many samples.
    #[arg(long)]
    calibration_steps: Option<u64>,
}

impl BenchArgs {
    fn resolve(&self) -> anyhow::Result<BenchmarkConfig> {
        let mut c = match &self.config {
            Some(path) => BenchmarkConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => BenchmarkConfig::new(
                SystemKind::Quantum,
                PotentialKind::Quadratic,
                ControllerKind::Lqr,
                EstimatorKind::None,
                100,
            ),
        };
        if let Some(v) = self.system {
            c.system = v;
        }
        if let Some(v) = self.potential {
            c.potential = PotentialSpec::Named(v);
        }
        if let Some(v) = self.controller {
            c.controller = v;
        }
        if let Some(v) = self.estimator {
            c.estimator = v;
        }
        if let Some(v) = &self.nmeas {
            c.nmeas = v.clone();
        }
        if let Some(v) = &self.sigma_ancilla {
            c.sigma_ancilla = v.clone();
        }
        if let Some(v) = self.episodes {
            c.episodes = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.max_steps {
            c.max_steps = v;
        }
        c.noise.artifacts.extend(self.noise.iter().cloned());
        if let Some(steps) = self.calibration_steps {
            c.noise.calibration = Some(CalibrationOptions {
                steps,
                ..CalibrationOptions::default()
            });
        }
        Ok(c)
    }
}

fn workers(cli: Option<usize>) -> usize {
    cli.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = workers(cli.workers);
    match cli.command {
        Command::Sweep { bench, out } => {
            let config = bench.resolve()?;
            config.validate()?;
            bench::check_writable(&out).with_context(|| format!("cannot write {}", out.display()))?;
            let sweep = bench::run_sweep(&config, workers)?;
            bench::write_sweep(&sweep, &out)?;
            bench::print_sweep(io::stdout().lock(), &sweep.rows)?;
        }
        Command::Ratio {
            bench,
            baseline,
            baseline_controller,
            baseline_estimator,
            out,
        } => {
            let subject = bench.resolve()?;
            let base = match baseline {
                Some(path) => BenchmarkConfig::load(&path)?,
                None => BenchmarkConfig {
                    controller: baseline_controller,
                    estimator: baseline_estimator,
                    ..subject.clone()
                },
            };
            subject.validate()?;
            base.validate()?;
            if subject.cells().len() != base.cells().len() {
                bail!(qcartpole::Error::Config("subject and baseline must share sweep axes".into()));
            }
            bench::check_writable(&out).with_context(|| format!("cannot write {}", out.display()))?;
            let a = bench::run_sweep(&subject, workers)?;
            let b = bench::run_sweep(&base, workers)?;
            let rows = bench::ratio_table(&a, &b)?;
            bench::write_ratio(&rows, &a, &b, &out)?;
            for r in &rows {
                match (r.ratio, r.std_error) {
                    (Some(v), Some(e)) => println!("{:>8.3} {:>4} {v:.3} ± {e:.3}", r.sigma_ancilla, r.n_meas),
                    _ => println!("{:>8.3} {:>4} unavailable", r.sigma_ancilla, r.n_meas),
                }
            }
        }
        Command::Calibrate {
            potential,
            sigma_ancilla,
            steps,
            burn_in,
            seed,
            out,
        } => {
            let potential = Potential::benchmark(potential);
            let mut params = SimParams::default();
            if let Some(s) = sigma_ancilla {
                params.sigma_ancilla = s;
            }
            params.validate()?;
            let opts = CalibrationOptions {
                steps,
                burn_in,
                ..CalibrationOptions::default()
            };
            bench::check_writable(&out).with_context(|| format!("cannot write {}", out.display()))?;
            let report = calibrate_noise(&potential, &params, &opts, seed)?;
            let artifact = NoiseArtifact {
                potential,
                params,
                noise: report.noise,
                seed,
                samples: report.samples,
            };
            write_artifact(&out, &artifact)?;
            println!("{} samples over {} episodes", report.samples, report.episodes);
            println!("R = {}", report.noise.measurement());
            println!("Q = {}", report.noise.process());
            println!("S = {}", report.noise.cross());
        }
        Command::Histogram {
            bench,
            steps,
            burn_in,
            out,
        } => {
            let config = bench.resolve()?;
            let pair = bench::run_histogram(&config, steps, burn_in, workers)?;
            bench::write_histograms(&pair, &config, burn_in, &out)?;
            println!(
                "{} steps from {} episodes: <x> mean {:.3}, skewness {:.3}, iqr {:.3}",
                pair.retained,
                pair.episodes,
                pair.position.mean(),
                pair.position.skewness(),
                pair.position.iqr()
            );
        }
        Command::Serve {
            bench,
            mode,
            obs_source,
            stdio,
            port,
            host,
            max_sessions,
        } => {
            let mut config = bench.resolve()?;
            if bench.controller.is_none() {
                config.controller = ControllerKind::Agent;
            }
            let cell = config.cells()[0];
            let noise = config.noise_for(cell.sigma_ancilla)?;
            let session = SessionConfig {
                env: config.env_config(cell, noise),
                mode,
                obs_source,
                seed: config.seed,
            };
            match (stdio, port) {
                (true, _) => {
                    protocol::serve_stream(BufReader::new(io::stdin()), io::stdout(), session)?;
                }
                (false, Some(port)) => protocol::serve_tcp((host.as_str(), port), session, max_sessions)?,
                (false, None) => bail!(qcartpole::Error::Config("serve needs --stdio or --port".into())),
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<qcartpole::Error>() {
        Some(e) if e.is_config() => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
