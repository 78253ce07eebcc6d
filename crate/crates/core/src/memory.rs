//! Tilt and chromato-axial memory effects, analytic and Monte Carlo.

use num_complex::Complex64;

use crate::analytic::{closed_ab, diffusion_kernel, m11_planewave};
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral};
use crate::rng::run_ensemble;
use crate::simulator::{init_source, Simulator, SourceSpec};
use crate::statistics::{estimate_mean, MomentEstimate};

/// Points per axis of the argmax grids.
pub const SCAN_POINTS: usize = 41;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Tilt scan for a gaussian source envelope of width `source_width`.
/// Tilts are scalar multiples of the unit vector along `tau` (the first
/// axis when `tau = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TiltScan {
    pub tau: Vec<f64>,
    pub z: f64,
    pub omega0: f64,
    pub sigma2: f64,
    pub source_width: f64,
}

impl TiltScan {
    pub fn dim(&self) -> usize {
        self.tau.len()
    }

    fn direction(&self) -> Vec<f64> {
        let n = self.tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        if n == 0.0 {
            let mut e = vec![0.0; self.dim()];
            e[0] = 1.0;
            e
        } else {
            self.tau.iter().map(|t| t / n).collect()
        }
    }

    fn along(&self, s: f64) -> Vec<f64> {
        self.direction().iter().map(|e| e * s).collect()
    }

    /// `Γ̌(κ, 0) = (√π w)^d e^{−w²|κ|²/4}`.
    pub fn gamma_check(&self, kappa: &[f64]) -> f64 {
        let k2: f64 = kappa.iter().map(|k| k * k).sum();
        let w = self.source_width;
        (std::f64::consts::PI.sqrt() * w).powi(self.dim() as i32) * (-w * w * k2 / 4.0).exp()
    }

    /// `−3ω₀τ/(2z)` as a signed multiple of the scan direction.
    pub fn analytic_optimum(&self) -> f64 {
        let n = self.tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        -1.5 * self.omega0 * n / self.z
    }

    pub fn with_tau(&self, tau: Vec<f64>) -> Self {
        Self { tau, ..self.clone() }
    }
}

/// `𝒞_z = D_σ(z, τ, Δκ) Γ̌(Δκ − Δκ′, 0)`.
pub fn tilt_correlation(scan: &TiltScan, dkappa: &[f64], dkappa_prime: &[f64]) -> f64 {
    let diff: Vec<f64> = dkappa.iter().zip(dkappa_prime).map(|(a, b)| a - b).collect();
    diffusion_kernel(scan.z, &scan.tau, dkappa, scan.omega0, scan.sigma2) * scan.gamma_check(&diff)
}

fn tilt_along(scan: &TiltScan, s: f64, sp: f64) -> f64 {
    tilt_correlation(scan, &scan.along(s), &scan.along(sp))
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

pub fn symmetric_grid(half_span: f64, points: usize) -> Vec<f64> {
    (0..points).map(|j| -half_span + 2.0 * half_span * j as f64 / (points - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltOptimum {
    /// Grid argmax `(Δκ, Δκ′)` along the scan direction.
    pub grid: (f64, f64),
    pub refined: (f64, f64),
    pub analytic: f64,
    pub cell: f64,
    pub value: f64,
}

/// Argmax of `|𝒞_z|` over a 41×41 grid spanning twice the analytic
/// optimum, refined by alternating golden-section searches.
pub fn tilt_optimum(scan: &TiltScan) -> Result<TiltOptimum> {
    let analytic = scan.analytic_optimum();
    let half = if analytic == 0.0 { 1.0 } else { 2.0 * analytic.abs() };
    let grid = symmetric_grid(half, SCAN_POINTS);
    let cell = grid[1] - grid[0];
    let mut best = (0, 0, f64::NEG_INFINITY);
    for (i, &s) in grid.iter().enumerate() {
        for (j, &sp) in grid.iter().enumerate() {
            let v = tilt_along(scan, s, sp).abs();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    let (i, j, _) = best;
    let last = SCAN_POINTS - 1;
    if i == 0 || i == last {
        return Err(Error::OptimumOnBoundary(grid[i]));
    }
    if j == 0 || j == last {
        return Err(Error::OptimumOnBoundary(grid[j]));
    }
    let (mut s, mut sp) = (grid[i], grid[j]);
    for _ in 0..6 {
        s = golden_max(|x| tilt_along(scan, x, sp).abs(), s - cell, s + cell, 1e-12 * (1.0 + half));
        sp = golden_max(|x| tilt_along(scan, s, x).abs(), sp - cell, sp + cell, 1e-12 * (1.0 + half));
    }
    Ok(TiltOptimum { grid: (grid[i], grid[j]), refined: (s, sp), analytic, cell, value: tilt_along(scan, s, sp) })
}

/// Full width at half maximum in `|τ|` of `f(|τ|)`, which must peak at 0
/// and decay monotonically.
pub fn fwhm(f: impl Fn(f64) -> f64) -> Result<f64> {
    let peak = f(0.0);
    let mut hi = 1.0;
    while f(hi) > 0.5 * peak {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidArgument("profile does not fall to half maximum".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.5 * peak {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthComparison {
    pub untilted: f64,
    pub optimized: f64,
    pub ratio: f64,
}

/// FWHM in `|τ|` of `𝒞_z(τ,0,0)` against that of the correlation maximized
/// over `Δκ = Δκ′` separately at every `τ`.
pub fn tilt_width_ratio(scan: &TiltScan) -> Result<WidthComparison> {
    let dir = scan.direction();
    let at = |t: f64| scan.with_tau(dir.iter().map(|e| e * t).collect());
    let untilted = fwhm(|t| tilt_along(&at(t), 0.0, 0.0))?;
    let optimized = fwhm(|t| {
        let s = at(t);
        let span = 4.0 * s.analytic_optimum().abs() + 1.0;
        let k = golden_max(|x| tilt_along(&s, x, x), -span, span, 1e-13);
        tilt_along(&s, k, k)
    })?;
    Ok(WidthComparison { untilted, optimized, ratio: optimized / untilted })
}

/// `u(x − s)` by a Fourier phase ramp.
pub fn spectral_shift(values: &[Complex64], grid: &Grid, spectral: &Spectral, shift: &[f64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    spectral.forward(&mut buf);
    for (v, k) in buf.iter_mut().zip(grid.wavevectors()) {
        let phase: f64 = k.iter().zip(shift).map(|(k, s)| k * s).sum();
        *v *= Complex64::from_polar(1.0, -phase);
    }
    spectral.inverse(&mut buf);
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltMcPoint {
    pub dkappa: Vec<f64>,
    pub dkappa_prime: Vec<f64>,
    pub estimate: MomentEstimate,
}

/// Monte Carlo estimates of `∫ E[u₁(r/ε − ητ/2) u₂*(r/ε + ητ/2)] e^{−iΔκ·r} dr`
/// with gaussian sources tilted by `±εΔκ′/2` and propagated through one
/// medium realization each. The integral runs over the periodic cell.
/// Every distinct source tilt is propagated once per realization.
pub fn tilt_mc_scan(
    sim: &Simulator,
    scan: &TiltScan,
    pairs: &[(Vec<f64>, Vec<f64>)],
    n_realizations: usize,
    seed: u64,
) -> Result<Vec<TiltMcPoint>> {
    if n_realizations < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_realizations });
    }
    let regime = sim.regime();
    let grid = sim.grid().clone();
    let (eps, eta) = (regime.epsilon, regime.eta);
    let key = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    let mut tilts: Vec<Vec<f64>> = Vec::new();
    let index = |t: Vec<f64>, tilts: &mut Vec<Vec<f64>>| {
        if let Some(i) = tilts.iter().position(|x| key(x) == key(&t)) {
            i
        } else {
            tilts.push(t);
            tilts.len() - 1
        }
    };
    let plan: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(_, dkp)| {
            let a = index(dkp.iter().map(|k| 0.5 * k).collect(), &mut tilts);
            let b = index(dkp.iter().map(|k| -0.5 * k).collect(), &mut tilts);
            (a, b)
        })
        .collect();
    let sources = tilts
        .iter()
        .map(|t| init_source(regime, &grid, &SourceSpec::gaussian(scan.source_width, grid.dim()).with_tilt(t.clone())))
        .collect::<Result<Vec<_>>>()?;
    let half: Vec<f64> = scan.tau.iter().map(|t| 0.5 * eta * t).collect();
    let minus_half: Vec<f64> = half.iter().map(|h| -h).collect();
    let weight = (eps * grid.spacing()).powi(grid.dim() as i32);
    let points = grid.points();
    let ramps: Vec<Vec<Complex64>> = pairs
        .iter()
        .map(|(dk, _)| {
            points
                .iter()
                .map(|x| Complex64::from_polar(weight, -eps * x.iter().zip(dk).map(|(x, k)| x * k).sum::<f64>()))
                .collect()
        })
        .collect();
    let spectral = sim.spectral();
    let samples = run_ensemble(n_realizations, seed, |_, rng| {
        let mut fields = sources.clone();
        sim.propagate_shared(&mut fields, scan.z, rng)?;
        // u₁(x − ητ/2) and u₂(x + ητ/2)
        let first: Vec<Vec<Complex64>> = fields.iter().map(|f| spectral_shift(&f.values, &grid, spectral, &half)).collect();
        let second: Vec<Vec<Complex64>> =
            fields.iter().map(|f| spectral_shift(&f.values, &grid, spectral, &minus_half)).collect();
        Ok(plan
            .iter()
            .zip(&ramps)
            .map(|(&(a, b), ramp)| first[a].iter().zip(&second[b]).zip(ramp).map(|((u, v), r)| u * v.conj() * r).sum())
            .collect::<Vec<Complex64>>())
    })?;
    pairs
        .iter()
        .enumerate()
        .map(|(k, (dk, dkp))| {
            let column: Vec<Complex64> = samples.iter().map(|s| s[k]).collect();
            Ok(TiltMcPoint { dkappa: dk.clone(), dkappa_prime: dkp.clone(), estimate: estimate_mean(&column)? })
        })
        .collect()
}

pub fn tilt_mc_correlation(
    sim: &Simulator,
    scan: &TiltScan,
    dkappa: &[f64],
    dkappa_prime: &[f64],
    n_realizations: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let pairs = [(dkappa.to_vec(), dkappa_prime.to_vec())];
    Ok(tilt_mc_scan(sim, scan, &pairs, n_realizations, seed)?[0].estimate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChromaScan {
    pub omega: f64,
    pub h_grid: Vec<f64>,
    pub z0: f64,
    pub omega0: f64,
    pub sigma2: f64,
    pub dim: usize,
}

impl ChromaScan {
    pub fn magnitude(&self, h: f64) -> f64 {
        m11_planewave(h, &vec![0.0; self.dim], self.omega, self.z0, self.omega0, self.sigma2).norm()
    }

    fn b(&self) -> Complex64 {
        closed_ab(self.z0, self.omega, self.omega0, self.sigma2).1
    }
}

/// `(h, |m₁,₁(h, 0; Ω)|)` over the scan grid.
pub fn chroma_profile(scan: &ChromaScan) -> Vec<(f64, f64)> {
    scan.h_grid.iter().map(|&h| (h, scan.magnitude(h))).collect()
}

/// `h_opt = ω₀ b_I / (2|b|²)`.
pub fn h_opt(scan: &ChromaScan) -> f64 {
    let b = scan.b();
    scan.omega0 * b.im / (2.0 * b.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaArgmax {
    pub grid: f64,
    pub refined: f64,
    pub refined_cell: f64,
}

/// Grid argmax of the profile, then the argmax of a 41-point grid spanning
/// one cell either side of it.
pub fn chroma_argmax(scan: &ChromaScan) -> Result<ChromaArgmax> {
    let profile = chroma_profile(scan);
    if profile.len() < 3 {
        return Err(Error::InvalidArgument("h grid needs at least three points".into()));
    }
    let (k, _) = profile
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &(_, v))| if v > acc.1 { (k, v) } else { acc });
    if k == 0 || k + 1 == profile.len() {
        return Err(Error::OptimumOnBoundary(profile[k].0));
    }
    let cell = 0.5 * (profile[k + 1].0 - profile[k - 1].0);
    let fine: Vec<f64> = symmetric_grid(cell, SCAN_POINTS).iter().map(|d| profile[k].0 + d).collect();
    let refined = fine
        .iter()
        .map(|&h| (h, scan.magnitude(h)))
        .fold((0.0, f64::NEG_INFINITY), |acc, (h, v)| if v > acc.1 { (h, v) } else { acc })
        .0;
    Ok(ChromaArgmax { grid: profile[k].0, refined, refined_cell: fine[1] - fine[0] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaImprovement {
    pub h_opt: f64,
    /// `|m₁,₁(h_opt,0;Ω)| / |m₁,₁(0,0;Ω)|` from the moment itself.
    pub ratio: f64,
    /// `(1 + b_I²/b_R²)^{d/4}`.
    pub display_factor: f64,
    /// `1 + b_I²/b_R²`, as usually quoted.
    pub stated_factor: f64,
}

pub fn chroma_improvement(scan: &ChromaScan) -> ChromaImprovement {
    let b = scan.b();
    let h = h_opt(scan);
    let stated = 1.0 + b.im * b.im / (b.re * b.re);
    ChromaImprovement {
        h_opt: h,
        ratio: scan.magnitude(h) / scan.magnitude(0.0),
        display_factor: stated.powf(scan.dim as f64 / 4.0),
        stated_factor: stated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::alpha_omega;

    fn scan(tau: f64) -> TiltScan {
        TiltScan { tau: vec![tau], z: 1.0, omega0: 1.0, sigma2: 1.0, source_width: 1.0 }
    }

    #[test]
    fn correlation_reference_values() {
        let s = scan(0.4);
        let g0 = s.gamma_check(&[0.0]);
        assert!((g0 - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let c00 = tilt_correlation(&s, &[0.0], &[0.0]);
        assert!((c00 - (-0.16f64 / 8.0).exp() * g0).abs() < 1e-15);
        let copt = tilt_correlation(&s, &[-0.6], &[-0.6]);
        assert!((copt - (-0.16f64 / 32.0).exp() * g0).abs() < 1e-15);
        assert_eq!(tilt_correlation(&scan(0.0), &[0.0], &[0.0]), g0);
        // at τ = 0 a common tilt still decorrelates through the ξ² term
        let tilted = tilt_correlation(&scan(0.0), &[0.7], &[0.7]);
        assert!((tilted - (-0.49f64 / 24.0).exp() * g0).abs() < 1e-15);
    }

    #[test]
    fn prime_dependence_only_through_gamma() {
        let s = scan(0.3);
        let dk = [0.25];
        for dkp in [-1.0, -0.2, 0.4, 1.3] {
            let ratio = tilt_correlation(&s, &dk, &[dkp]) / s.gamma_check(&[dk[0] - dkp]);
            assert!((ratio - diffusion_kernel(1.0, &[0.3], &dk, 1.0, 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn optimum_lands_on_analytic_value() {
        let opt = tilt_optimum(&scan(0.4)).unwrap();
        assert!((opt.analytic + 0.6).abs() < 1e-15);
        assert!((opt.grid.0 - opt.analytic).abs() <= opt.cell);
        assert!((opt.refined.0 + 0.6).abs() < 1e-6);
        assert!((opt.refined.1 + 0.6).abs() < 1e-6);
        let zero = tilt_optimum(&scan(0.0)).unwrap();
        assert_eq!(zero.grid, (0.0, 0.0));
    }

    #[test]
    fn finite_difference_slope_vanishes_at_optimum() {
        let s = scan(0.4);
        let h = 1e-4;
        let d = (tilt_along(&s, -0.6 + h, -0.6) - tilt_along(&s, -0.6 - h, -0.6)) / (2.0 * h);
        assert!(d.abs() < 1e-7);
    }

    #[test]
    fn width_doubles() {
        let w = tilt_width_ratio(&scan(0.4)).unwrap();
        assert!((w.ratio - 2.0).abs() < 1e-6, "{w:?}");
        assert!((w.untilted - 2.0 * (8.0 * 2f64.ln()).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn shift_moves_a_bump() {
        let grid = Grid::new(256, 32.0, 1).unwrap();
        let sp = Spectral::new(&grid);
        let f = |x: f64| Complex64::new((-(x * x)).exp(), 0.0);
        let vals: Vec<Complex64> = grid.axis().iter().map(|&x| f(x)).collect();
        let moved = spectral_shift(&vals, &grid, &sp, &[0.3]);
        for (x, v) in grid.axis().iter().zip(&moved) {
            assert!((v - f(x - 0.3)).norm() < 1e-12);
        }
    }

    fn chroma(omega: f64) -> ChromaScan {
        ChromaScan { omega, h_grid: symmetric_grid(1.0, 201), z0: 1.0, omega0: 1.0, sigma2: 1.0, dim: 1 }
    }

    #[test]
    fn chroma_peak_at_zero_without_offset() {
        let s = chroma(0.0);
        assert_eq!(h_opt(&s), 0.0);
        let arg = chroma_argmax(&s).unwrap();
        assert!(arg.refined.abs() <= arg.refined_cell);
        let imp = chroma_improvement(&s);
        assert!((imp.ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chroma_argmax_matches_formula() {
        for om in [-2.0, -0.5, 0.5, 1.0, 2.0] {
            let s = chroma(om);
            let arg = chroma_argmax(&s).unwrap();
            assert!((arg.refined - h_opt(&s)).abs() <= arg.refined_cell, "Ω = {om}");
        }
    }

    #[test]
    fn small_offset_optimum_and_improvement() {
        let s = chroma(0.3);
        assert!(alpha_omega(0.3, 1.0).norm() * s.z0 <= 0.3);
        let h = h_opt(&s);
        let approx = -s.z0 * s.omega / (3.0 * s.omega0);
        assert!(((h - approx) / approx).abs() < 0.05, "{h} vs {approx}");
        let imp = chroma_improvement(&s);
        assert!(imp.ratio >= 1.0);
        assert!((imp.ratio - imp.display_factor).abs() < 1e-8);
    }

    #[test]
    fn four_dimensional_display_equals_stated() {
        let mut s = chroma(1.0);
        s.dim = 4;
        let imp = chroma_improvement(&s);
        assert!((imp.display_factor - imp.stated_factor).abs() < 1e-14);
        assert!((imp.ratio - imp.stated_factor).abs() < 1e-8);
    }

    #[test]
    fn profile_symmetric_under_joint_sign_flip() {
        for h in [0.1, 0.35, 0.8] {
            let a = chroma(0.7).magnitude(h);
            let b = chroma(-0.7).magnitude(-h);
            assert!((a - b).abs() < 1e-13);
        }
    }
}
