//! Periodic transverse grids, their dual (wavenumber) grids and complex fields
//! sampled on them.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid with `n` points per transverse dimension on a cell
/// `[-L/2, L/2)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    dim: usize,
}

impl Grid {
    pub fn new(n: usize, length: f64, dim: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length = {length} must be positive")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not supported")));
        }
        Ok(Self { n, length, dim })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dual_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `Δξ^d / (2π)^d`, the quadrature weight of the dual grid.
    pub fn dual_cell_volume(&self) -> f64 {
        (self.dual_spacing() / (2.0 * std::f64::consts::PI)).powi(self.dim as i32)
    }

    /// Axis coordinates `-L/2 + jΔx`.
    pub fn axis(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.n).map(|j| -0.5 * self.length + j as f64 * dx).collect()
    }

    /// Axis wavenumbers in FFT order, spanning `[-π/Δx, π/Δx)`.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        let dk = self.dual_spacing();
        let n = self.n as i64;
        (0..n).map(|m| if m < n / 2 { m as f64 * dk } else { (m - n) as f64 * dk }).collect()
    }

    /// Multi-index of a flat (row-major) position.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    pub fn ravel(&self, ij: [usize; 2]) -> usize {
        match self.dim {
            1 => ij[0],
            _ => ij[0] * self.n + ij[1],
        }
    }

    /// Physical coordinates of every sample, flattened row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axis = self.axis();
        (0..self.len())
            .map(|i| {
                let ij = self.unravel(i);
                ij[..self.dim].iter().map(|&a| axis[a]).collect()
            })
            .collect()
    }

    /// Dual-grid wavevectors in the same flat ordering as the FFT output.
    pub fn wavevectors(&self) -> Vec<Vec<f64>> {
        let ks = self.axis_wavenumbers();
        (0..self.len())
            .map(|i| {
                let ij = self.unravel(i);
                ij[..self.dim].iter().map(|&a| ks[a]).collect()
            })
            .collect()
    }

    pub fn wavenumber_sq(&self) -> Vec<f64> {
        self.wavevectors().iter().map(|k| k.iter().map(|v| v * v).sum()).collect()
    }

    /// Flat index of the Hermitian partner `-ξ` of each dual-grid point.
    pub fn negated_index(&self, idx: usize) -> usize {
        let ij = self.unravel(idx);
        let neg = |a: usize| (self.n - a) % self.n;
        self.ravel([neg(ij[0]), if self.dim == 2 { neg(ij[1]) } else { 0 }])
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Planned forward/inverse FFTs over a [`Grid`]. The forward transform is the
/// raw DFT sum; the inverse includes the `1/n^d` factor so the pair is an
/// identity.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.n(),
            dim: grid.dim(),
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&*self.forward, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&*self.inverse, data);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn apply(&self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        // rows (the whole buffer for d = 1), batched
        fft.process(data);
        if self.dim == 2 {
            transpose_square(data, self.n);
            fft.process(data);
            transpose_square(data, self.n);
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Complex field on a periodic grid at axial position `z`, carrying the
/// frequency and source tilt it was launched with.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub values: Vec<Complex64>,
    pub z: f64,
    pub omega: f64,
    pub tilt: Vec<f64>,
    pub grid: Grid,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<Complex64>, z: f64, omega: f64, tilt: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if tilt.len() != grid.dim() {
            return Err(Error::InvalidArgument("tilt dimension does not match grid".into()));
        }
        Ok(Self { values, z, omega, tilt, grid })
    }

    /// Discrete L² energy `Σ|u|² Δx^d`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Continuum-normalized transform `û(ξ) = Σ u(x) e^{-iξ·x} Δx^d`, in FFT
    /// order. The phase from the cell origin `-L/2` is included.
    pub fn spectrum(&self, spectral: &Spectral) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        spectral.forward(&mut buf);
        let origin = -0.5 * self.grid.length();
        let vol = self.grid.cell_volume();
        for (v, k) in buf.iter_mut().zip(self.grid.wavevectors()) {
            let phase: f64 = -k.iter().map(|ki| ki * origin).sum::<f64>();
            *v *= Complex64::from_polar(vol, phase);
        }
        buf
    }
}
