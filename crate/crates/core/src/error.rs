use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tilt component {tilt} exceeds the grid Nyquist wavenumber {nyquist}")]
    TiltBeyondNyquist { tilt: f64, nyquist: f64 },

    #[error("axial step {dz} exceeds the stability bound {dz_max}")]
    StepTooLarge { dz: f64, dz_max: f64 },

    #[error("target distance {target} is behind the field position {current}")]
    TargetBehind { target: f64, current: f64 },

    #[error("fields live on different grids or frequencies")]
    GridMismatch,

    #[error("exponent {exponent} exceeds the overflow guard {limit}")]
    Overflow { exponent: f64, limit: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("integration diverged at z = {z}")]
    Divergence { z: f64 },

    #[error("grid under-resolved: {0}")]
    UnderResolved(String),

    #[error("optimum at grid boundary ({0})")]
    OptimumOnBoundary(f64),
}
