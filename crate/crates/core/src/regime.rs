//! Scaling parameters of the weak-coupling diffusive regime and the affine map
//! between macroscopic query offsets and physical simulation coordinates.
//!
//! A query `(h, x, Ω, κ)` around a macroscopic point `r` corresponds to the
//! physical evaluation point
//!
//! ```text
//! z = z0 + ε η h,   x_phys = r / ε + η x,   ω = ω0 + ε η Ω,   k = k0 + ε κ
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRegime {
    pub epsilon: f64,
    pub eta: f64,
    pub omega0: f64,
    pub k0: Vec<f64>,
    pub z0: f64,
    pub dim: usize,
}

impl ScalingRegime {
    pub fn new(epsilon: f64, eta: f64, omega0: f64, k0: Vec<f64>, z0: f64, dim: usize) -> Result<Self> {
        let regime = Self { epsilon, eta, omega0, k0, z0, dim };
        regime.validate()?;
        Ok(regime)
    }

    /// One transverse dimension, ε = 0.01, η = 0.25, ω0 = 1, k0 = 0, z0 = 1.
    pub fn desk_default() -> Self {
        Self { epsilon: 0.01, eta: 0.25, omega0: 1.0, k0: vec![0.0], z0: 1.0, dim: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidRegime(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        let finite = [self.epsilon, self.eta, self.omega0, self.z0]
            .iter()
            .chain(self.k0.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRegime("parameters must be finite".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidRegime("epsilon must be > 0".into()));
        }
        if self.epsilon >= self.eta {
            return Err(Error::InvalidRegime("epsilon must be < eta".into()));
        }
        if self.eta > 1.0 {
            return Err(Error::InvalidRegime("eta must be <= 1".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidRegime("omega0 must be > 0".into()));
        }
        if self.z0 < 0.0 {
            return Err(Error::InvalidRegime("z0 must be >= 0".into()));
        }
        if self.k0.len() != self.dim {
            return Err(Error::InvalidRegime(format!(
                "k0 has {} components, expected {}",
                self.k0.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Optical depth of a unit propagation distance, `1/η²`.
    pub fn optical_depth(&self) -> f64 {
        1.0 / (self.eta * self.eta)
    }

    /// The asymptotic theory ties η to ε through `η = 1/log|log ε|`. The
    /// regime treats both as free; this reports how far the pair is from that
    /// relation so callers can warn.
    pub fn coupling_note(&self) -> Option<String> {
        let ll = self.epsilon.ln().abs().ln();
        if ll <= 0.0 {
            return Some(format!(
                "epsilon = {} is too large for the log-log coupling to be defined",
                self.epsilon
            ));
        }
        let eta_theory = 1.0 / ll;
        let rel = (self.eta - eta_theory).abs() / eta_theory;
        (rel > 0.5).then(|| {
            format!(
                "eta = {} differs from 1/log|log eps| = {:.4}; treating eta as a free parameter",
                self.eta, eta_theory
            )
        })
    }

    pub fn map_offsets(&self, q: &QueryOffsets) -> PhysicalPoint {
        let ee = self.epsilon * self.eta;
        PhysicalPoint {
            z: self.z0 + ee * q.h,
            x: q.r.iter().zip(&q.x).map(|(r, x)| r / self.epsilon + self.eta * x).collect(),
            omega: self.omega0 + ee * q.omega,
            k: self.k0.iter().zip(&q.kappa).map(|(k0, kap)| k0 + self.epsilon * kap).collect(),
        }
    }

    /// Inverse of [`map_offsets`](Self::map_offsets) for a fixed macroscopic `r`.
    pub fn unmap(&self, p: &PhysicalPoint, r: &[f64]) -> QueryOffsets {
        let ee = self.epsilon * self.eta;
        QueryOffsets {
            h: (p.z - self.z0) / ee,
            x: p.x.iter().zip(r).map(|(x, r)| (x - r / self.epsilon) / self.eta).collect(),
            omega: (p.omega - self.omega0) / ee,
            kappa: p.k.iter().zip(&self.k0).map(|(k, k0)| (k - k0) / self.epsilon).collect(),
            r: r.to_vec(),
        }
    }
}

/// Dimensionless offsets of one evaluation point relative to `(z0, r, ω0, k0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOffsets {
    pub h: f64,
    pub x: Vec<f64>,
    /// Frequency offset Ω.
    pub omega: f64,
    pub kappa: Vec<f64>,
    pub r: Vec<f64>,
}

impl QueryOffsets {
    pub fn zero(dim: usize) -> Self {
        Self { h: 0.0, x: vec![0.0; dim], omega: 0.0, kappa: vec![0.0; dim], r: vec![0.0; dim] }
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite()
            && self.omega.is_finite()
            && self.x.iter().chain(&self.kappa).chain(&self.r).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalPoint {
    pub z: f64,
    pub x: Vec<f64>,
    pub omega: f64,
    pub k: Vec<f64>,
}
