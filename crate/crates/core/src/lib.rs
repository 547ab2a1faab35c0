//! Quantum cartpole: a wavepacket balanced on an inverted potential by weak
//! measurements and momentum kicks, with a calibrated classical surrogate,
//! Kalman/LQR control and a line protocol for external agents.

pub mod bench;
pub mod episode;
pub mod error;
pub mod estimators;
pub mod lqr;
pub mod measurement;
pub mod params;
pub mod plant;
pub mod protocol;
pub mod quantum;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use params::{Potential, PotentialKind, SimParams};
