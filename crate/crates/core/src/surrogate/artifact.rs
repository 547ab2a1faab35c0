//! Versioned plain-text noise model files.
//!
//! Floats are written with 17 significant digits so that a write/read cycle
//! reproduces every bit. The file is valid TOML.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::Deserialize;

use super::{build_model, NoiseModel};
use crate::error::{Error, Result};
use crate::params::{Potential, SimParams};

pub const ARTIFACT_FORMAT: &str = "qcartpole-noise";
pub const ARTIFACT_VERSION: u32 = 1;

/// A calibrated noise model together with the environment it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseArtifact {
    pub potential: Potential,
    pub params: SimParams,
    pub noise: NoiseModel,
    pub seed: u64,
    pub samples: u64,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(v: [f64; 2]) -> String {
    format!("[{}, {}]", num(v[0]), num(v[1]))
}

fn matrix(m: &Matrix2<f64>) -> String {
    format!("[{}, {}]", row([m[(0, 0)], m[(0, 1)]]), row([m[(1, 0)], m[(1, 1)]]))
}

impl NoiseArtifact {
    pub fn to_text(&self) -> String {
        let model = build_model(&self.potential, &self.params);
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "format = \"{ARTIFACT_FORMAT}\"");
        let _ = writeln!(out, "version = {ARTIFACT_VERSION}");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "samples = {}", self.samples);
        out.push_str("\n[params]\n");
        for (key, v) in [
            ("dt", p.dt),
            ("mass", p.mass),
            ("coupling", p.coupling),
            ("sigma_system", p.sigma_system),
            ("sigma_ancilla", p.sigma_ancilla),
            ("p_init_spread", p.p_init_spread),
            ("x_threshold", p.x_threshold),
            ("force_max", p.force_max),
        ] {
            let _ = writeln!(out, "{key} = {}", num(v));
        }
        out.push_str("\n[potential]\n");
        match self.potential {
            Potential::Quadratic { k } => {
                let _ = writeln!(out, "kind = \"quadratic\"\nk = {}", num(k));
            }
            Potential::Quartic { k } => {
                let _ = writeln!(out, "kind = \"quartic\"\nk = {}", num(k));
            }
            Potential::Cosine { amplitude, length } => {
                let _ = writeln!(
                    out,
                    "kind = \"cosine\"\namplitude = {}\nlength = {}",
                    num(amplitude),
                    num(length)
                );
            }
            Potential::Flat => out.push_str("kind = \"flat\"\n"),
        }
        out.push_str("\n# linearization at the origin, informational\n[model]\n");
        let _ = writeln!(out, "a = {}", matrix(&model.a));
        let _ = writeln!(out, "b = {}", row([model.b[0], model.b[1]]));
        out.push_str("\n[noise]\n");
        let _ = writeln!(out, "measurement = {}", matrix(self.noise.measurement()));
        let _ = writeln!(out, "process = {}", matrix(self.noise.process()));
        let _ = writeln!(out, "cross = {}", matrix(self.noise.cross()));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let raw: RawArtifact = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.format != ARTIFACT_FORMAT {
            return Err(Error::Parse(format!("unexpected format tag '{}'", raw.format)));
        }
        if raw.version != ARTIFACT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported artifact version {} (expected {ARTIFACT_VERSION})",
                raw.version
            )));
        }
        raw.params.validate()?;
        raw.potential.validate()?;
        let model = build_model(&raw.potential, &raw.params);
        let a = to_matrix(raw.model.a);
        let b = Vector2::new(raw.model.b[0], raw.model.b[1]);
        if (a - model.a).abs().max() > 1e-12 || (b - model.b).abs().max() > 1e-12 {
            return Err(Error::Parse("model matrices do not match params and potential".into()));
        }
        let noise = NoiseModel::new(
            to_matrix(raw.noise.measurement),
            to_matrix(raw.noise.process),
            to_matrix(raw.noise.cross),
        )?;
        Ok(Self {
            potential: raw.potential,
            params: raw.params,
            noise,
            seed: raw.seed,
            samples: raw.samples,
        })
    }
}

fn to_matrix(m: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArtifact {
    format: String,
    version: u32,
    seed: u64,
    samples: u64,
    params: SimParams,
    potential: Potential,
    model: RawModel,
    noise: RawNoise,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    a: [[f64; 2]; 2],
    b: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    measurement: [[f64; 2]; 2],
    process: [[f64; 2]; 2],
    cross: [[f64; 2]; 2],
}

pub fn write_artifact(path: &Path, artifact: &NoiseArtifact) -> Result<()> {
    std::fs::write(path, artifact.to_text())?;
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<NoiseArtifact> {
    NoiseArtifact::from_text(&std::fs::read_to_string(path)?)
}
