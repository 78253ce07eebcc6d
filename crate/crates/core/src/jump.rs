//! Compound-Poisson jump process behind the Feynman-Kac representation of
//! the second moment, and its Brownian limit.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::covariance::Covariance;
use crate::error::{Error, Result};
use crate::rng::run_ensemble;
use crate::statistics::{jackknife, estimate_mean, MomentEstimate};

#[derive(Clone, Copy)]
pub struct JumpProcessParams<'a> {
    pub eta: f64,
    pub omega0: f64,
    pub model: &'a dyn Covariance,
}

impl<'a> JumpProcessParams<'a> {
    pub fn new(eta: f64, omega0: f64, model: &'a dyn Covariance) -> Result<Self> {
        if !(eta > 0.0) || !(omega0 > 0.0) {
            return Err(Error::InvalidArgument(format!("eta and omega0 must be positive, got {eta}, {omega0}")));
        }
        if !(model.r0() > 0.0) {
            return Err(Error::InvalidArgument("jump rate vanishes for R(0) = 0".into()));
        }
        Ok(Self { eta, omega0, model })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `λ = ω₀²R(0)/(4η²)` per unit z.
    pub fn rate(&self) -> f64 {
        self.omega0 * self.omega0 * self.model.r0() / (4.0 * self.eta * self.eta)
    }

    /// Limit variance rate per component, `ω₀²σ²/4`.
    pub fn diffusivity(&self) -> f64 {
        self.omega0 * self.omega0 * self.model.sigma2() / 4.0
    }
}

/// Fourth moment of one component of the jump law, `∂⁴R(0)/R(0)` along the
/// first axis, by a five-point stencil.
pub fn jump_moment4(model: &dyn Covariance) -> f64 {
    let h = 0.01 * model.length_scale();
    let mut x = vec![0.0; model.dim()];
    let mut at = |s: f64| {
        x[0] = s * h;
        model.eval_r(&x)
    };
    let d4 = (at(2.0) - 4.0 * at(1.0) + 6.0 * at(0.0) - 4.0 * at(-1.0) + at(-2.0)) / h.powi(4);
    d4 / model.r0()
}

/// Piecewise-constant path: `positions[k]` holds on `[times[k], times[k+1])`
/// with `times[0] = z_from` and a final segment ending at `z_to`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub z_to: f64,
}

impl JumpPath {
    pub fn start(&self) -> &[f64] {
        &self.positions[0]
    }

    pub fn end(&self) -> &[f64] {
        self.positions.last().expect("path has a start")
    }

    pub fn n_jumps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn at(&self, z: f64) -> &[f64] {
        let k = self.times.partition_point(|&t| t <= z).max(1) - 1;
        &self.positions[k]
    }

    /// `(length, position)` for every constant segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().enumerate().map(move |(k, &t)| {
            let end = self.times.get(k + 1).copied().unwrap_or(self.z_to);
            (end - t, self.positions[k].as_slice())
        })
    }
}

pub fn sample_path(params: &JumpProcessParams, start: &[f64], z_from: f64, z_to: f64, rng: &mut ChaCha8Rng) -> Result<JumpPath> {
    if !(z_to >= z_from) {
        return Err(Error::TargetBehind { target: z_to, current: z_from });
    }
    if start.len() != params.dim() {
        return Err(Error::InvalidArgument(format!("start has {} components, model is {}-d", start.len(), params.dim())));
    }
    let mean = params.rate() * (z_to - z_from);
    let count = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut jump_times: Vec<f64> = (0..count).map(|_| z_from + (z_to - z_from) * rng.random::<f64>()).collect();
    jump_times.sort_by(f64::total_cmp);
    let mut times = Vec::with_capacity(count + 1);
    let mut positions = Vec::with_capacity(count + 1);
    times.push(z_from);
    positions.push(start.to_vec());
    for t in jump_times {
        let k = params.model.sample_jump(rng);
        let next: Vec<f64> = positions.last().unwrap().iter().zip(&k).map(|(x, k)| x + params.eta * k).collect();
        times.push(t);
        positions.push(next);
    }
    Ok(JumpPath { times, positions, z_to })
}

/// `V(ξ) = Ω|ξ|²/(2ω₀²) + ξ·ζ/ω₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub omega: f64,
    pub omega0: f64,
    pub zeta: Vec<f64>,
}

impl PotentialSpec {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        let sq: f64 = xi.iter().map(|x| x * x).sum();
        let dot: f64 = xi.iter().zip(&self.zeta).map(|(x, z)| x * z).sum();
        self.omega * sq / (2.0 * self.omega0 * self.omega0) + dot / self.omega0
    }

    /// `∫ V(path(s)) ds`, exact since the path is constant between jumps.
    pub fn path_integral(&self, path: &JumpPath) -> f64 {
        path.segments().map(|(len, x)| len * self.eval(x)).sum()
    }
}

/// Feynman-Kac estimate of `E[ρ₀(χ(Z)) e^{i∫_z^Z V(χ(s))ds} | χ(z) = ξ]`.
#[allow(clippy::too_many_arguments)]
pub fn rho_estimator<F>(
    params: &JumpProcessParams,
    potential: &PotentialSpec,
    rho0: F,
    z: f64,
    big_z: f64,
    xi: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<MomentEstimate>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let samples = run_ensemble(n_paths, seed, |_, rng| {
        let path = sample_path(params, xi, z, big_z, rng)?;
        Ok(rho0(path.end()) * Complex64::from_polar(1.0, potential.path_integral(&path)))
    })?;
    estimate_mean(&samples)
}

/// Brownian-limit value of the Feynman-Kac expectation for a gaussian
/// `ρ₀(ξ) = exp(−|ξ − c|²/(2s²))` and the quadratic potential, with
/// `W` of variance `ω₀²σ²/4` per unit z and component. Each axis carries
/// `exp(−Aξ² − Bξ − C)` whose coefficients obey Riccati-type ODEs in
/// `T = Z − z`, integrated here by RK4.
pub fn brownian_rho(
    potential: &PotentialSpec,
    sigma2: f64,
    center: &[f64],
    width: f64,
    horizon: f64,
    xi: &[f64],
) -> Complex64 {
    let v = potential.omega0 * potential.omega0 * sigma2 / 4.0;
    let alpha = potential.omega / (2.0 * potential.omega0 * potential.omega0);
    let i = Complex64::i();
    let mut out = Complex64::new(1.0, 0.0);
    for ((&c, &beta0), &x) in center.iter().zip(&potential.zeta).zip(xi) {
        let beta = beta0 / potential.omega0;
        let rhs = |s: [Complex64; 3]| {
            let [a, b, _] = s;
            [-i * alpha - 2.0 * v * a * a, -i * beta - 2.0 * v * a * b, v * a - 0.5 * v * b * b]
        };
        let mut s = [
            Complex64::new(0.5 / (width * width), 0.0),
            Complex64::new(-c / (width * width), 0.0),
            Complex64::new(c * c / (2.0 * width * width), 0.0),
        ];
        let steps = ((horizon / 1e-4).ceil() as usize).max(1);
        let h = horizon / steps as f64;
        let add = |s: [Complex64; 3], k: [Complex64; 3], f: f64| [s[0] + k[0] * f, s[1] + k[1] * f, s[2] + k[2] * f];
        for _ in 0..steps {
            let k1 = rhs(s);
            let k2 = rhs(add(s, k1, h / 2.0));
            let k3 = rhs(add(s, k2, h / 2.0));
            let k4 = rhs(add(s, k3, h));
            for j in 0..3 {
                s[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
            }
        }
        out *= (-(s[0] * x * x) - s[1] * x - s[2]).exp();
    }
    out
}

/// Closed form of the quadratic coefficient in [`brownian_rho`]:
/// `A(T) = (μ/(2v))(P cos μT − sin μT)/(cos μT + P sin μT)` with
/// `μ² = 2ivα`, `P = 2vA₀/μ`.
pub fn brownian_quadratic_coefficient(potential: &PotentialSpec, sigma2: f64, width: f64, horizon: f64) -> Complex64 {
    let v = potential.omega0 * potential.omega0 * sigma2 / 4.0;
    let alpha = potential.omega / (2.0 * potential.omega0 * potential.omega0);
    let a0 = 0.5 / (width * width);
    if alpha == 0.0 {
        return Complex64::new(a0 / (1.0 + 2.0 * v * a0 * horizon), 0.0);
    }
    let mu = (Complex64::i() * 2.0 * v * alpha).sqrt();
    let p = 2.0 * v * a0 / mu;
    let (c, s) = ((mu * horizon).cos(), (mu * horizon).sin());
    mu / (2.0 * v) * (p * c - s) / (c + p * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMoments {
    pub variance: MomentEstimate,
    pub expected_variance: f64,
    pub fourth_cumulant: MomentEstimate,
    pub expected_fourth_cumulant: f64,
    pub excess_kurtosis: MomentEstimate,
    pub expected_excess_kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianLimitReport {
    pub eta: f64,
    pub z: f64,
    pub n_paths: usize,
    pub mean_jumps: MomentEstimate,
    pub expected_jumps: f64,
    pub components: Vec<ComponentMoments>,
}

/// Empirical second and fourth moments of `χ^η(z) − χ^η(0)` against the
/// gaussian limit and the compound-Poisson cumulants.
pub fn brownian_limit_check(params: &JumpProcessParams, z: f64, n_paths: usize, seed: u64) -> Result<BrownianLimitReport> {
    let d = params.dim();
    let start = vec![0.0; d];
    let rows = run_ensemble(n_paths, seed, |_, rng| {
        let path = sample_path(params, &start, 0.0, z, rng)?;
        Ok((path.n_jumps(), path.end().to_vec()))
    })?;
    let jumps: Vec<Complex64> = rows.iter().map(|(n, _)| Complex64::new(*n as f64, 0.0)).collect();
    let lz = params.rate() * z;
    let m4 = jump_moment4(params.model);
    let m2 = params.model.sigma2() / params.model.r0();
    let eta2 = params.eta * params.eta;
    let mut components = Vec::with_capacity(d);
    for i in 0..d {
        let powers: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|(_, x)| (1..=4).map(|p| Complex64::new(x[i].powi(p), 0.0)).collect())
            .collect();
        let central = |m: &[Complex64]| {
            let (m1, m2, m3, m4) = (m[0].re, m[1].re, m[2].re, m[3].re);
            let c2 = m2 - m1 * m1;
            let c4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4);
            (c2, c4 - 3.0 * c2 * c2)
        };
        let variance = jackknife(&powers, |m| Complex64::new(central(m).0, 0.0))?;
        let fourth_cumulant = jackknife(&powers, |m| Complex64::new(central(m).1, 0.0))?;
        let excess_kurtosis = jackknife(&powers, |m| {
            let (c2, k4) = central(m);
            Complex64::new(k4 / (c2 * c2), 0.0)
        })?;
        let expected_variance = lz * eta2 * m2;
        let expected_fourth_cumulant = lz * eta2 * eta2 * m4;
        components.push(ComponentMoments {
            variance,
            expected_variance,
            fourth_cumulant,
            expected_fourth_cumulant,
            excess_kurtosis,
            expected_excess_kurtosis: expected_fourth_cumulant / (expected_variance * expected_variance),
        });
    }
    Ok(BrownianLimitReport {
        eta: params.eta,
        z,
        n_paths,
        mean_jumps: estimate_mean(&jumps)?,
        expected_jumps: lz,
        components,
    })
}
