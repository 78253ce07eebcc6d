//! Monte Carlo and analytic moments of paraxial wavebeams in the
//! Itô-Schrödinger regime.

pub mod analytic;
pub mod covariance;
pub mod error;
pub mod grid;
pub mod jump;
pub mod memory;
pub mod regime;
pub mod rng;
pub mod simulator;
pub mod statistics;

pub use covariance::{Covariance, GaussianCovariance};
pub use error::{Error, Result};
pub use grid::{Grid, Spectral, WaveField};
pub use regime::{PhysicalPoint, QueryOffsets, ScalingRegime};
pub use simulator::{init_source, phase_compensate, Simulator, SourceProfile, SourceSpec};
