//! Benchmark sweeps over measurement count and pointer width, ratio tables
//! and histogram exports, each written as CSV next to a TOML manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::episode::{
    collect_histograms, run_batch, ControllerBinding, ControllerKind, EnvConfig, HistogramPair, LoopOptions,
    DEFAULT_MAX_STEPS,
};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::params::{Potential, PotentialKind, SimParams};
use crate::plant::SystemKind;
use crate::stats::{BatchSummary, Histogram};
use crate::surrogate::{calibrate_noise, read_artifact, CalibrationOptions, NoiseModel};

pub const MANIFEST_FORMAT: &str = "qcartpole-run";
pub const MANIFEST_VERSION: u32 = 1;

/// A potential given either by name (benchmark constants) or in full.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Named(PotentialKind),
    Custom(Potential),
}

impl PotentialSpec {
    pub fn resolve(self) -> Potential {
        match self {
            PotentialSpec::Named(kind) => Potential::benchmark(kind),
            PotentialSpec::Custom(p) => p,
        }
    }
}

/// Where the surrogate and filter noise models come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSource {
    /// Calibrated artifacts; a cell uses the one whose potential and
    /// parameters match it exactly.
    pub artifacts: Vec<PathBuf>,
    /// Calibrate cells without a matching artifact on the fly.
    pub calibration: Option<CalibrationOptions>,
}

fn default_nmeas() -> Vec<usize> {
    vec![1]
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub system: SystemKind,
    pub potential: PotentialSpec,
    pub controller: ControllerKind,
    pub estimator: EstimatorKind,
    #[serde(default = "default_nmeas")]
    pub nmeas: Vec<usize>,
    /// Pointer widths to sweep; empty means `params.sigma_ancilla`. For the
    /// classical system this selects the calibrated noise level.
    #[serde(default)]
    pub sigma_ancilla: Vec<f64>,
    pub episodes: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub params: SimParams,
    #[serde(default)]
    pub options: LoopOptions,
    #[serde(default)]
    pub noise: NoiseSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub sigma_ancilla: f64,
    pub n_meas: usize,
}

impl BenchmarkConfig {
    pub fn new(
        system: SystemKind,
        potential: PotentialKind,
        controller: ControllerKind,
        estimator: EstimatorKind,
        episodes: u64,
    ) -> Self {
        Self {
            system,
            potential: PotentialSpec::Named(potential),
            controller,
            estimator,
            nmeas: default_nmeas(),
            sigma_ancilla: Vec::new(),
            episodes,
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            params: SimParams::default(),
            options: LoopOptions::default(),
            noise: NoiseSource::default(),
        }
    }

    /// Parses a config file, or the config embedded in a run manifest.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let config = if value.get("format").and_then(|v| v.as_str()) == Some(MANIFEST_FORMAT) {
            let manifest: Manifest = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
            manifest.config
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("benchmark config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if self.nmeas.is_empty() || self.nmeas.contains(&0) {
            return Err(Error::config("nmeas needs at least one entry, all at least 1"));
        }
        if self.sigma_ancilla.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("sigma_ancilla entries must be positive"));
        }
        if self.controller == ControllerKind::Agent || self.estimator == EstimatorKind::Agent {
            return Err(Error::config("agent bindings are served with `serve`, not benchmarked"));
        }
        for cell in self.cells() {
            self.env_skeleton(cell).validate_without_noise()?;
        }
        Ok(())
    }

    fn sigmas(&self) -> Vec<f64> {
        if self.sigma_ancilla.is_empty() {
            vec![self.params.sigma_ancilla]
        } else {
            self.sigma_ancilla.clone()
        }
    }

    /// Sweep cells, pointer width outermost.
    pub fn cells(&self) -> Vec<Cell> {
        self.sigmas()
            .into_iter()
            .flat_map(|sigma_ancilla| {
                self.nmeas.iter().map(move |&n_meas| Cell {
                    sigma_ancilla,
                    n_meas,
                })
            })
            .collect()
    }

    fn needs_noise(&self) -> bool {
        self.system == SystemKind::Classical || self.estimator.is_filter()
    }

    fn env_skeleton(&self, cell: Cell) -> EnvConfig {
        let params = SimParams {
            sigma_ancilla: cell.sigma_ancilla,
            ..self.params
        };
        let mut binding = ControllerBinding::new(self.controller, self.estimator, cell.n_meas);
        binding.max_steps = self.max_steps;
        let mut env = EnvConfig::new(self.system, self.potential.resolve(), params, binding);
        env.options = self.options;
        env
    }

    /// Loads or calibrates the noise model for one pointer width.
    pub fn noise_for(&self, sigma_ancilla: f64) -> Result<Option<NoiseModel>> {
        if !self.needs_noise() {
            return Ok(None);
        }
        let potential = self.potential.resolve();
        let params = SimParams {
            sigma_ancilla,
            ..self.params
        };
        for path in &self.noise.artifacts {
            let art = read_artifact(path)?;
            if art.potential == potential && art.params == params {
                return Ok(Some(art.noise));
            }
        }
        match &self.noise.calibration {
            Some(opts) => {
                log::info!("calibrating noise for sigma_ancilla = {sigma_ancilla}");
                Ok(Some(calibrate_noise(&potential, &params, opts, self.seed)?.noise))
            }
            None => Err(Error::config(format!(
                "no noise artifact matches {potential:?} at sigma_ancilla = {sigma_ancilla} and calibration is off"
            ))),
        }
    }

    pub fn env_config(&self, cell: Cell, noise: Option<NoiseModel>) -> EnvConfig {
        let mut env = self.env_skeleton(cell);
        env.noise = noise;
        env
    }
}

impl EnvConfig {
    fn validate_without_noise(&self) -> Result<()> {
        let mut probe = self.clone();
        probe.noise = Some(NoiseModel::uncorrelated(1.0, 1.0)?);
        probe.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma_ancilla: f64,
    pub n_meas: usize,
    pub episodes: usize,
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    pub censored_fraction: f64,
    pub aborted: usize,
}

impl SweepRow {
    fn new(cell: Cell, s: &BatchSummary) -> Self {
        Self {
            sigma_ancilla: cell.sigma_ancilla,
            n_meas: cell.n_meas,
            episodes: s.episodes,
            mean: s.mean,
            median: s.median,
            std_error: s.std_error,
            censored_fraction: s.censored_fraction,
            aborted: s.aborted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub sigma_ancilla: f64,
    pub measurement: [[f64; 2]; 2],
    pub process: [[f64; 2]; 2],
    pub cross: [[f64; 2]; 2],
}

impl NoiseEntry {
    fn new(sigma_ancilla: f64, n: &NoiseModel) -> Self {
        let m = |x: &Matrix2<f64>| [[x[(0, 0)], x[(0, 1)]], [x[(1, 0)], x[(1, 1)]]];
        Self {
            sigma_ancilla,
            measurement: m(n.measurement()),
            process: m(n.process()),
            cross: m(n.cross()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub config: BenchmarkConfig,
    pub rows: Vec<SweepRow>,
    pub noise: Vec<NoiseEntry>,
}

pub fn run_sweep(config: &BenchmarkConfig, workers: usize) -> Result<Sweep> {
    config.validate()?;
    let mut noise_cache: BTreeMap<u64, Option<NoiseModel>> = BTreeMap::new();
    let mut noise = Vec::new();
    let mut rows = Vec::new();
    for cell in config.cells() {
        let key = cell.sigma_ancilla.to_bits();
        if !noise_cache.contains_key(&key) {
            let n = config.noise_for(cell.sigma_ancilla)?;
            if let Some(n) = &n {
                noise.push(NoiseEntry::new(cell.sigma_ancilla, n));
            }
            noise_cache.insert(key, n);
        }
        let env = config.env_config(cell, noise_cache[&key]);
        let report = run_batch(&env, config.episodes, config.seed, workers)?;
        log::info!(
            "sigma_ancilla {} n_meas {}: mean {:.1} over {} episodes",
            cell.sigma_ancilla,
            cell.n_meas,
            report.summary.mean,
            report.summary.episodes
        );
        rows.push(SweepRow::new(cell, &report.summary));
    }
    Ok(Sweep {
        config: config.clone(),
        rows,
        noise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub sigma_ancilla: f64,
    pub n_meas: usize,
    /// `None` where the baseline mean is zero.
    pub ratio: Option<f64>,
    pub std_error: Option<f64>,
}

/// Cell-wise ratio of mean termination times with a delta-method error
/// that treats the two batches as independent.
pub fn ratio_table(subject: &Sweep, baseline: &Sweep) -> Result<Vec<RatioRow>> {
    let axes = |s: &Sweep| s.rows.iter().map(|r| (r.sigma_ancilla.to_bits(), r.n_meas)).collect::<Vec<_>>();
    if axes(subject) != axes(baseline) {
        return Err(Error::config("subject and baseline must share sweep axes"));
    }
    Ok(subject
        .rows
        .iter()
        .zip(&baseline.rows)
        .map(|(a, b)| {
            let (ratio, std_error) = if b.mean == 0.0 {
                (None, None)
            } else {
                let r = a.mean / b.mean;
                let rel_a = if a.mean == 0.0 { 0.0 } else { a.std_error / a.mean };
                let rel = (rel_a.powi(2) + (b.std_error / b.mean).powi(2)).sqrt();
                (Some(r), Some(r.abs() * rel))
            };
            RatioRow {
                sigma_ancilla: a.sigma_ancilla,
                n_meas: a.n_meas,
                ratio,
                std_error,
            }
        })
        .collect())
}

/// Provenance record written next to every output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_hash: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub statistics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<NoiseEntry>,
    pub config: BenchmarkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BenchmarkConfig>,
}

impl Manifest {
    pub fn new(command: &str, config: &BenchmarkConfig) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            config_hash: config.hash(),
            seed: config.seed,
            baseline_hash: None,
            statistics: BTreeMap::new(),
            noise: Vec::new(),
            config: config.clone(),
            baseline: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// `runs/sweep.csv` → `runs/sweep.manifest.toml`.
pub fn manifest_path(table: &Path) -> PathBuf {
    table.with_extension("manifest.toml")
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(sweep: &Sweep, path: &Path) -> Result<()> {
    if sweep.rows.is_empty() {
        return Err(Error::config("nothing to write"));
    }
    write_csv(path, &sweep.rows)?;
    let mut manifest = Manifest::new("sweep", &sweep.config);
    manifest.noise = sweep.noise.clone();
    manifest.write(&manifest_path(path))
}

pub fn write_ratio(rows: &[RatioRow], subject: &Sweep, baseline: &Sweep, path: &Path) -> Result<()> {
    write_csv(path, rows)?;
    let mut manifest = Manifest::new("ratio", &subject.config);
    manifest.baseline_hash = Some(baseline.config.hash());
    manifest.baseline = Some(baseline.config.clone());
    manifest.noise = subject.noise.clone();
    manifest.write(&manifest_path(path))
}

/// Histogram of the first cell of `config`.
pub fn run_histogram(config: &BenchmarkConfig, total_steps: u64, burn_in: u64, workers: usize) -> Result<HistogramPair> {
    config.validate()?;
    let cell = config.cells()[0];
    let noise = config.noise_for(cell.sigma_ancilla)?;
    collect_histograms(&config.env_config(cell, noise), total_steps, burn_in, config.seed, workers)
}

fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["center", "mass"])?;
    for (c, m) in h.centers().zip(h.masses()) {
        w.write_record([c.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `position.csv`, `momentum.csv` and `manifest.toml` into `dir`.
pub fn write_histograms(pair: &HistogramPair, config: &BenchmarkConfig, burn_in: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_histogram_csv(&dir.join("position.csv"), &pair.position)?;
    write_histogram_csv(&dir.join("momentum.csv"), &pair.momentum)?;
    let mut manifest = Manifest::new("histogram", config);
    let s = &mut manifest.statistics;
    s.insert("burn_in".into(), burn_in as f64);
    s.insert("retained".into(), pair.retained as f64);
    s.insert("episodes".into(), pair.episodes as f64);
    for (name, h) in [("position", &pair.position), ("momentum", &pair.momentum)] {
        s.insert(format!("{name}_mean"), h.mean());
        s.insert(format!("{name}_skewness"), h.skewness());
        s.insert(format!("{name}_iqr"), h.iqr());
        s.insert(format!("{name}_out_of_range"), (h.underflow + h.overflow) as f64);
    }
    manifest.write(&dir.join("manifest.toml"))
}

/// Human-readable table for terminals.
pub fn print_sweep<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{:>8} {:>6} {:>10} {:>8} {:>9}", "sigma", "nmeas", "mean", "stderr", "censored")?;
    for r in rows {
        writeln!(
            out,
            "{:>8.3} {:>6} {:>10.1} {:>8.1} {:>8.1}%",
            r.sigma_ancilla,
            r.n_meas,
            r.mean,
            r.std_error,
            100.0 * r.censored_fraction
        )?;
    }
    Ok(())
}

/// Creates the file up front so an unwritable destination fails before
/// any compute.
pub fn check_writable(path: &Path) -> Result<()> {
    File::create(path)?;
    Ok(())
}
