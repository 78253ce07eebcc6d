//! Limiting second moment of the field: the quadratic-ansatz (ABCD) solution,
//! its closed forms, the Fresnel construction of the two-distance moment,
//! the equal-distance explicit solution and a direct numerical solve of the
//! moment PDE
//!
//! ```text
//! ∂z M = (iΩ/2ω₀²) Δτ M + (i/ω₀) ∇r·∇τ M − (ω₀²σ²/8)|τ|² M,   M(0,r,τ) = |u₀(r)|² e^{ir·κ}
//! ```
//!
//! Transforms in `r` use `e^{-iζ·r}`. With that convention the transverse
//! transport shifts `τ` to `τ − ζz/ω₀`, and
//!
//! ```text
//! M(z,r,τ) = ∫ Γ̌(ζ−κ) exp(−[a_d + b|τ'|² + c τ'·ζ + d|ζ|²]) e^{iζ·r} dζ/(2π)^d,   τ' = τ − ζz/ω₀
//! ```
//!
//! where `a_d = d·a` (the Laplacian of a d-dimensional gaussian contributes
//! `d` copies of the scalar term).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::covariance::Covariance;
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral};
use crate::regime::ScalingRegime;
use crate::simulator::SourceProfile;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcdState {
    pub z: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl AbcdState {
    pub fn zero() -> Self {
        let o = c(0.0);
        Self { z: 0.0, a: o, b: o, c: o, d: o }
    }

    /// 𝔟 = b − iω₀/(2h).
    pub fn frak_b(&self, h: f64, omega0: f64) -> Complex64 {
        self.b - I * (omega0 / (2.0 * h))
    }
}

/// Right-hand side of the scalar ABCD system at axial position `z`.
fn abcd_rhs(z: f64, y: [Complex64; 4], omega: f64, w: f64, s2: f64) -> [Complex64; 4] {
    let [_, b, cc, _] = y;
    let k = I * (omega / (w * w));
    [
        k * b,
        -2.0 * k * b * b + c(w * w * s2 / 8.0),
        -2.0 * k * b * cc + c(w * s2 * z / 4.0),
        -0.5 * k * cc * cc + c(s2 * z * z / 8.0),
    ]
}

/// Classical RK4 for the ABCD system from `z = 0` with zero initial data.
/// The step is `z/⌈z/dz_ode⌉`; the returned trajectory includes both ends.
pub fn solve_abcd(z: f64, omega: f64, omega0: f64, sigma2: f64, dz_ode: f64) -> Result<Vec<AbcdState>> {
    if !(dz_ode > 0.0) || !(z >= 0.0) {
        return Err(Error::InvalidArgument(format!("need dz_ode > 0 and z >= 0, got {dz_ode}, {z}")));
    }
    let n = (z / dz_ode - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(AbcdState::zero());
    if n == 0 {
        return Ok(out);
    }
    let h = z / n as f64;
    let mut y = [c(0.0); 4];
    let add = |y: [Complex64; 4], k: [Complex64; 4], s: f64| {
        [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s, y[3] + k[3] * s]
    };
    for i in 0..n {
        let zi = i as f64 * h;
        let k1 = abcd_rhs(zi, y, omega, omega0, sigma2);
        let k2 = abcd_rhs(zi + 0.5 * h, add(y, k1, 0.5 * h), omega, omega0, sigma2);
        let k3 = abcd_rhs(zi + 0.5 * h, add(y, k2, 0.5 * h), omega, omega0, sigma2);
        let k4 = abcd_rhs(zi + h, add(y, k3, h), omega, omega0, sigma2);
        for j in 0..4 {
            y[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
        let zn = (i + 1) as f64 * h;
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > 1e150) {
            return Err(Error::Divergence { z: zn });
        }
        out.push(AbcdState { z: zn, a: y[0], b: y[1], c: y[2], d: y[3] });
    }
    Ok(out)
}

/// ABCD coefficients at `z` by RK4.
pub fn abcd_at(z: f64, omega: f64, omega0: f64, sigma2: f64, dz_ode: f64) -> Result<AbcdState> {
    Ok(*solve_abcd(z, omega, omega0, sigma2, dz_ode)?.last().expect("trajectory is never empty"))
}

/// Exact coefficients at zero frequency offset.
pub fn abcd_omega0(z: f64, omega0: f64, sigma2: f64) -> AbcdState {
    AbcdState {
        z,
        a: c(0.0),
        b: c(omega0 * omega0 * sigma2 * z / 8.0),
        c: c(omega0 * sigma2 * z * z / 8.0),
        d: c(sigma2 * z.powi(3) / 24.0),
    }
}

/// `α_Ω = e^{iπ/4} √(σ²Ω/4)` for Ω ≥ 0; negative Ω returns the conjugate.
pub fn alpha_omega(omega: f64, sigma2: f64) -> Complex64 {
    let alpha = Complex64::from_polar((sigma2 * omega.abs() / 4.0).sqrt(), PI / 4.0);
    if omega < 0.0 { alpha.conj() } else { alpha }
}

/// Closed forms `a = ½ log cosh(αz)` and `b = (ω₀²σ²/(8α)) tanh(αz)`.
///
/// The logarithm is taken on the branch continuous in `z` from `a(0) = 0`:
/// for `Re α > 0`, `log cosh x = x − ln 2 + Log(1 + e^{-2x})` and the last
/// argument never leaves the right half-plane. Negative Ω is handled by
/// conjugation, since the ODEs are conjugated by Ω → −Ω.
pub fn closed_ab(z: f64, omega: f64, omega0: f64, sigma2: f64) -> (Complex64, Complex64, Complex64) {
    if omega < 0.0 {
        let (a, b, al) = closed_ab(z, -omega, omega0, sigma2);
        return (a.conj(), b.conj(), al.conj());
    }
    let alpha = alpha_omega(omega, sigma2);
    let x = alpha * z;
    let b0 = omega0 * omega0 * sigma2 * z / 8.0;
    if x.norm() < 1e-3 {
        let x2 = x * x;
        let a = x2 / 4.0 - x2 * x2 / 24.0 + x2 * x2 * x2 / 90.0;
        let b = c(b0) * (1.0 - x2 / 3.0 + x2 * x2 * (2.0 / 15.0) - x2 * x2 * x2 * (17.0 / 315.0));
        return (a, b, alpha);
    }
    let e = (-2.0 * x).exp();
    let a = 0.5 * (x - c(std::f64::consts::LN_2) + (1.0 + e).ln());
    let tanh = (1.0 - e) / (1.0 + e);
    let b = c(b0) * tanh / x;
    (a, b, alpha)
}

/// Two-distance moment for a plane-wave source,
///
/// ```text
/// m = (ω₀/(2ih𝔟))^{d/2} e^{-a_d} e^{-ω₀²𝔟_R|τ|²/(4h²|𝔟|²)} e^{iω₀|τ|²/(2h)·(1 + ω₀𝔟_I/(2h|𝔟|²))}
/// ```
///
/// and `e^{-a_d - b|τ|²}` at `h = 0`.
pub fn m11_planewave(h: f64, tau: &[f64], omega: f64, z0: f64, omega0: f64, sigma2: f64) -> Complex64 {
    let dim = tau.len() as f64;
    let (a, b, _) = closed_ab(z0, omega, omega0, sigma2);
    let t2: f64 = tau.iter().map(|t| t * t).sum();
    if h == 0.0 {
        return (-(dim * a) - b * t2).exp();
    }
    let fb = b - I * (omega0 / (2.0 * h));
    let nb = fb.norm_sqr();
    // principal branches of the Fresnel prefactor and the gaussian integral
    let pref = ((c(omega0) / (2.0 * PI * h * I)).sqrt() * (c(PI) / fb).sqrt()).powf(dim);
    let decay = -(omega0 * omega0 * fb.re * t2) / (4.0 * h * h * nb);
    let phase = omega0 * t2 / (2.0 * h) * (1.0 + omega0 * fb.im / (2.0 * h * nb));
    pref * (-(dim * a)).exp() * Complex64::from_polar(decay.exp(), phase)
}

/// Diffusion kernel
/// `D_σ(z,τ,ξ) = exp(−(ω₀²σ²z/8) [|τ|² + z ξ·τ/ω₀ + z²|ξ|²/(3ω₀²)])`.
pub fn diffusion_kernel(z: f64, tau: &[f64], xi: &[f64], omega0: f64, sigma2: f64) -> f64 {
    let t2: f64 = tau.iter().map(|t| t * t).sum();
    let x2: f64 = xi.iter().map(|t| t * t).sum();
    let xt: f64 = tau.iter().zip(xi).map(|(a, b)| a * b).sum();
    let bracket = t2 + z * xt / omega0 + z * z * x2 / (3.0 * omega0 * omega0);
    (-(omega0 * omega0 * sigma2 * z / 8.0) * bracket).exp()
}

/// `Γ̌(κ) = ∫ |u₀(r)|² e^{-ir·κ} dr` for the gaussian profile. A plane wave
/// has `Γ̌ = (2π)^d δ` and returns `None`.
pub fn gamma_check(profile: &SourceProfile, kappa: &[f64]) -> Option<f64> {
    match profile {
        SourceProfile::PlaneWave => None,
        SourceProfile::Gaussian { width } => {
            let k2: f64 = kappa.iter().map(|k| k * k).sum();
            Some((PI.sqrt() * width).powi(kappa.len() as i32) * (-width * width * k2 / 4.0).exp())
        }
    }
}

/// Fresnel multiplier `exp(−ih|ξ|²/(2ω₀))` on a grid's dual, FFT order.
pub fn fresnel_multiplier(grid: &Grid, h: f64, omega0: f64) -> Vec<Complex64> {
    grid.wavenumber_sq().iter().map(|k2| Complex64::from_polar(1.0, -h * k2 / (2.0 * omega0))).collect()
}

/// Applies the Fresnel kernel `(ω₀/(2πih))^{d/2} e^{iω₀|τ|²/(2h)}` by
/// convolution, through its Fourier multiplier.
pub fn fresnel_apply(values: &[Complex64], grid: &Grid, spectral: &Spectral, h: f64, omega0: f64) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    spectral.forward(&mut buf);
    for (v, m) in buf.iter_mut().zip(fresnel_multiplier(grid, h, omega0)) {
        *v *= m;
    }
    spectral.inverse(&mut buf);
    buf
}

/// Trapezoid rule over the cube `center ± half` with `n` points per axis,
/// divided by `(2π)^d`. Returns the sum and the largest integrand modulus on
/// the boundary relative to the largest overall.
fn dual_quadrature(
    center: &[f64],
    half: f64,
    n: usize,
    f: impl Fn(&[f64]) -> Complex64,
) -> (Complex64, f64) {
    let d = center.len();
    let h = 2.0 * half / (n - 1) as f64;
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut sum = Complex64::new(0.0, 0.0);
    let (mut edge, mut peak) = (0.0f64, 0.0f64);
    let mut z = vec![0.0; d];
    let total = n.pow(d as u32);
    for idx in 0..total {
        let (i, j) = (idx % n, idx / n);
        z[0] = center[0] - half + i as f64 * h;
        let mut wt = w(i);
        let mut on_edge = i == 0 || i == n - 1;
        if d == 2 {
            z[1] = center[1] - half + j as f64 * h;
            wt *= w(j);
            on_edge |= j == 0 || j == n - 1;
        }
        let v = f(&z);
        let m = v.norm();
        peak = peak.max(m);
        if on_edge {
            edge = edge.max(m);
        }
        sum += v * wt;
    }
    (sum * (h / (2.0 * PI)).powi(d as i32), edge / peak.max(1e-300))
}

/// Quadrature settings for the ζ-integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaQuadrature {
    /// Points per axis (odd keeps the centre on the grid).
    pub n: usize,
    /// Half-width in units of `1/w` for a gaussian source of width `w`.
    pub half_width: f64,
}

impl Default for ZetaQuadrature {
    fn default() -> Self {
        Self { n: 401, half_width: 13.0 }
    }
}

fn zeta_integral(
    width: f64,
    kappa: &[f64],
    r: &[f64],
    q: ZetaQuadrature,
    f: impl Fn(&[f64]) -> Complex64,
) -> Result<Complex64> {
    let half = q.half_width / width;
    let spacing = 2.0 * half / (q.n - 1) as f64;
    let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rmax * spacing > PI / 2.0 {
        return Err(Error::UnderResolved(format!("|r| = {rmax} needs a ζ spacing below {}", PI / (2.0 * rmax))));
    }
    let (value, edge) = dual_quadrature(kappa, half, q.n, |zeta| {
        let phase: f64 = zeta.iter().zip(r).map(|(a, b)| a * b).sum();
        f(zeta) * Complex64::from_polar(1.0, phase)
    });
    if edge > 1e-13 {
        return Err(Error::UnderResolved(format!("integrand at the ζ-window edge is {edge:.2e} of its peak")));
    }
    Ok(value)
}

/// Parameters shared by the limiting moment solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitMedium {
    pub omega0: f64,
    pub sigma2: f64,
}

fn shifted(tau: &[f64], zeta: &[f64], z: f64, omega0: f64) -> Vec<f64> {
    tau.iter().zip(zeta).map(|(t, k)| t - k * z / omega0).collect()
}

fn breve_exponent(s: &AbcdState, dim: usize, tau_s: &[f64], zeta: &[f64]) -> Complex64 {
    let t2: f64 = tau_s.iter().map(|t| t * t).sum();
    let tz: f64 = tau_s.iter().zip(zeta).map(|(a, b)| a * b).sum();
    let z2: f64 = zeta.iter().map(|t| t * t).sum();
    s.a * dim as f64 + s.b * t2 + s.c * tz + s.d * z2
}

/// `M(z, r, τ)` from the ABCD coefficients (RK4 with step `dz_ode`) and the
/// source's Γ̌, by quadrature over ζ.
#[allow(clippy::too_many_arguments)]
pub fn m11_general(
    z: f64,
    r: &[f64],
    tau: &[f64],
    omega: f64,
    kappa: &[f64],
    source: &SourceProfile,
    medium: LimitMedium,
    dz_ode: f64,
    quad: ZetaQuadrature,
) -> Result<Complex64> {
    let dim = tau.len();
    let state = if omega == 0.0 { abcd_omega0(z, medium.omega0, medium.sigma2) } else { abcd_at(z, omega, medium.omega0, medium.sigma2, dz_ode)? };
    match source {
        SourceProfile::PlaneWave => {
            let ts = shifted(tau, kappa, z, medium.omega0);
            let phase: f64 = kappa.iter().zip(r).map(|(a, b)| a * b).sum();
            Ok((-breve_exponent(&state, dim, &ts, kappa)).exp() * Complex64::from_polar(1.0, phase))
        }
        SourceProfile::Gaussian { width } => zeta_integral(*width, kappa, r, quad, |zeta| {
            let dz: Vec<f64> = zeta.iter().zip(kappa).map(|(a, b)| a - b).collect();
            let g = gamma_check(source, &dz).unwrap_or(0.0);
            let ts = shifted(tau, zeta, z, medium.omega0);
            (-breve_exponent(&state, dim, &ts, zeta)).exp() * g
        }),
    }
}

/// Diffusive-limit equal-distance moment at Ω = 0,
/// `∫ Γ̌(ζ−κ) D_σ(z, τ, −ζ) e^{iζ·r} dζ/(2π)^d`.
pub fn m11_omega0_diffusive(
    z: f64,
    r: &[f64],
    tau: &[f64],
    kappa: &[f64],
    source: &SourceProfile,
    medium: LimitMedium,
    quad: ZetaQuadrature,
) -> Result<Complex64> {
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    match source {
        SourceProfile::PlaneWave => {
            let phase: f64 = kappa.iter().zip(r).map(|(a, b)| a * b).sum();
            Ok(Complex64::from_polar(diffusion_kernel(z, tau, &neg(kappa), medium.omega0, medium.sigma2), phase))
        }
        SourceProfile::Gaussian { width } => zeta_integral(*width, kappa, r, quad, |zeta| {
            let dz: Vec<f64> = zeta.iter().zip(kappa).map(|(a, b)| a - b).collect();
            let g = gamma_check(source, &dz).unwrap_or(0.0);
            c(g * diffusion_kernel(z, tau, &neg(zeta), medium.omega0, medium.sigma2))
        }),
    }
}

/// Equal-distance moment at finite ε and Ω = 0,
///
/// ```text
/// M^ε(z,r,τ) = ∫∫ u₀(r' + εητ'/2) u₀*(r' − εητ'/2) e^{iζ·(r−r')} e^{ir'·κ}
///              × exp((ω₀²z/4η²) ∫₀¹ Q(ητ − ηsζz/ω₀) ds) dζ dr'/(2π)^d,   τ' = τ − ζz/ω₀
/// ```
///
/// The `r'` integral of the gaussian envelope is done in closed form; the
/// `s` average of `Q` uses the model's segment quadrature.
#[allow(clippy::too_many_arguments)]
pub fn m11_omega0_explicit(
    z: f64,
    r: &[f64],
    tau: &[f64],
    kappa: &[f64],
    source: &SourceProfile,
    model: &dyn Covariance,
    regime: &ScalingRegime,
    quad: ZetaQuadrature,
) -> Result<Complex64> {
    let (eps, eta, w0) = (regime.epsilon, regime.eta, regime.omega0);
    let gain = w0 * w0 * z / (4.0 * eta * eta);
    let potential = |zeta: &[f64]| {
        let a: Vec<f64> = tau.iter().map(|t| eta * t).collect();
        let b: Vec<f64> = zeta.iter().map(|k| -eta * k * z / w0).collect();
        gain * model.q_segment_mean(&a, &b)
    };
    match source {
        SourceProfile::PlaneWave => {
            let phase: f64 = kappa.iter().zip(r).map(|(a, b)| a * b).sum();
            Ok(Complex64::from_polar(potential(kappa).exp(), phase))
        }
        SourceProfile::Gaussian { width } => zeta_integral(*width, kappa, r, quad, |zeta| {
            let dz: Vec<f64> = zeta.iter().zip(kappa).map(|(a, b)| a - b).collect();
            let g = gamma_check(source, &dz).unwrap_or(0.0);
            let ts = shifted(tau, zeta, z, w0);
            let t2: f64 = ts.iter().map(|t| t * t).sum();
            let envelope = -(eps * eta).powi(2) * t2 / (4.0 * width * width);
            c(g * (envelope + potential(zeta)).exp())
        }),
    }
}

/// Discretization of the direct moment-PDE solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeConfig {
    pub n_tau: usize,
    pub tau_length: f64,
    pub dz: f64,
    /// Combine runs at `dz` and `dz/2` to cancel the leading splitting error.
    pub richardson: bool,
    /// ζ-points per axis for non-plane-wave sources.
    pub n_zeta: usize,
    pub zeta_half_width: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { n_tau: 2048, tau_length: 204.8, dz: 0.01, richardson: true, n_zeta: 129, zeta_half_width: 13.0 }
    }
}

/// One transverse line of the transformed PDE: for fixed ζ,
/// `∂z L = (iΩ/2ω₀²) ∂²τ L − (ζ/ω₀) ∂τ L − (ω₀²σ²/8) τ² L` with `L(0) = 1`,
/// by Strang splitting on a periodic τ grid. Returns values on the grid.
fn solve_line(z: f64, omega: f64, zeta: f64, medium: LimitMedium, grid: &Grid, spectral: &Spectral, dz: f64) -> Vec<Complex64> {
    let n = (z / dz - 1e-9).ceil().max(0.0) as usize;
    let mut buf = vec![c(1.0); grid.len()];
    if n == 0 {
        return buf;
    }
    let h = z / n as f64;
    let w0 = medium.omega0;
    let kin = |s: f64| -> Vec<Complex64> {
        grid.axis_wavenumbers()
            .iter()
            .map(|p| Complex64::from_polar(1.0, -s * (omega * p * p / (2.0 * w0 * w0) + zeta * p / w0)))
            .collect()
    };
    let (half, full) = (kin(0.5 * h), kin(h));
    let pot: Vec<f64> = grid.axis().iter().map(|t| (-h * w0 * w0 * medium.sigma2 * t * t / 8.0).exp()).collect();
    spectral.forward(&mut buf);
    for (v, m) in buf.iter_mut().zip(&half) {
        *v *= m;
    }
    for s in 0..n {
        spectral.inverse(&mut buf);
        for (v, p) in buf.iter_mut().zip(&pot) {
            *v *= p;
        }
        spectral.forward(&mut buf);
        let m = if s + 1 == n { &half } else { &full };
        for (v, k) in buf.iter_mut().zip(m) {
            *v *= k;
        }
    }
    spectral.inverse(&mut buf);
    buf
}

/// Band-limited interpolation of periodic grid samples at `t`.
fn trig_interpolate(values: &[Complex64], grid: &Grid, spectral: &Spectral, t: f64) -> Complex64 {
    let mut buf = values.to_vec();
    spectral.forward(&mut buf);
    let origin = grid.axis()[0];
    let n = grid.n();
    let ks = grid.axis_wavenumbers();
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, (v, k)) in buf.iter().zip(&ks).enumerate() {
        let weight = if n.is_multiple_of(2) && m == n / 2 { 0.5 } else { 1.0 };
        let mut term = v * Complex64::from_polar(weight, k * (t - origin));
        if weight < 1.0 {
            term += v * Complex64::from_polar(weight, -k * (t - origin));
        }
        acc += term;
    }
    acc / n as f64
}

fn line_value(z: f64, omega: f64, zeta: f64, tau: f64, medium: LimitMedium, cfg: &PdeConfig) -> Result<Complex64> {
    let grid = Grid::new(cfg.n_tau, cfg.tau_length, 1)?;
    if tau.abs() > 0.25 * cfg.tau_length || (zeta * z / medium.omega0).abs() > 0.25 * cfg.tau_length {
        return Err(Error::UnderResolved(format!("τ = {tau}, ζ = {zeta} too close to the periodic τ-window edge")));
    }
    let spectral = Spectral::new(&grid);
    let run = |dz: f64| trig_interpolate(&solve_line(z, omega, zeta, medium, &grid, &spectral, dz), &grid, &spectral, tau);
    if cfg.richardson {
        Ok((4.0 * run(0.5 * cfg.dz) - run(cfg.dz)) / 3.0)
    } else {
        Ok(run(cfg.dz))
    }
}

/// `M(z, r, τ)` by direct numerical solution of the moment PDE. The problem
/// separates over transverse axes for product sources and isotropic Σ, so
/// each axis is a one-dimensional transport–Schrödinger line in τ per ζ,
/// followed by a trapezoid ζ-integral.
#[allow(clippy::too_many_arguments)]
pub fn m11_pde_solve(
    z: f64,
    r: &[f64],
    tau: &[f64],
    omega: f64,
    kappa: &[f64],
    source: &SourceProfile,
    medium: LimitMedium,
    cfg: &PdeConfig,
) -> Result<Complex64> {
    if !(cfg.dz > 0.0) {
        return Err(Error::InvalidArgument("pde step must be positive".into()));
    }
    // splitting stays accurate while the potential step is small at the τ-window edge
    let edge = medium.omega0.powi(2) * medium.sigma2 * (0.25 * cfg.tau_length).powi(2) * cfg.dz / 8.0;
    if edge > 50.0 {
        return Err(Error::StepTooLarge { dz: cfg.dz, dz_max: 50.0 * cfg.dz / edge });
    }
    let mut total = c(1.0);
    for axis in 0..tau.len() {
        let (ri, ti, ki) = (r[axis], tau[axis], kappa[axis]);
        let factor = match source {
            SourceProfile::PlaneWave => line_value(z, omega, ki, ti, medium, cfg)? * Complex64::from_polar(1.0, ki * ri),
            SourceProfile::Gaussian { width } => {
                let half = cfg.zeta_half_width / width;
                let n = cfg.n_zeta;
                let h = 2.0 * half / (n - 1) as f64;
                let mut acc = c(0.0);
                for j in 0..n {
                    let zeta = ki - half + j as f64 * h;
                    let g = PI.sqrt() * width * (-(width * (zeta - ki)).powi(2) / 4.0).exp();
                    let wt = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                    acc += line_value(z, omega, zeta, ti, medium, cfg)? * Complex64::from_polar(g * wt, zeta * ri);
                }
                acc * (h / (2.0 * PI))
            }
        };
        total *= factor;
    }
    Ok(total)
}

/// Two-distance moment `m(h, r, τ)`: the Fresnel transform in τ of
/// `M(z₀, r, ·)` computed with [`m11_general`]. The kernel and the moment
/// both factor over transverse axes, so each axis is transformed on its own
/// τ grid.
#[allow(clippy::too_many_arguments)]
pub fn m11(
    h: f64,
    z0: f64,
    r: &[f64],
    tau: &[f64],
    omega: f64,
    kappa: &[f64],
    source: &SourceProfile,
    medium: LimitMedium,
    dz_ode: f64,
) -> Result<Complex64> {
    let quad = ZetaQuadrature::default();
    if h == 0.0 {
        return m11_general(z0, r, tau, omega, kappa, source, medium, dz_ode, quad);
    }
    let state = if omega == 0.0 { abcd_omega0(z0, medium.omega0, medium.sigma2) } else { abcd_at(z0, omega, medium.omega0, medium.sigma2, dz_ode)? };
    let br = state.b.re.max(1e-12);
    let bmag = state.b.norm().max(1e-12);
    let mut total = c(1.0);
    for axis in 0..tau.len() {
        // band limit of M in τ and its spread under the kernel
        let pmax = (160.0 * bmag).sqrt();
        let extent = 9.0 / br.sqrt() + (kappa[axis] * z0 / medium.omega0).abs() + h.abs() * pmax / medium.omega0 + tau[axis].abs();
        let dx = PI / pmax;
        let n = ((2.0 * extent / dx).ceil() as usize).next_power_of_two().max(256);
        let grid = Grid::new(n, n as f64 * dx, 1)?;
        let spectral = Spectral::new(&grid);
        let samples: Vec<Complex64> = grid
            .axis()
            .iter()
            .map(|&t| m11_general(z0, &[r[axis]], &[t], omega, &[kappa[axis]], source, medium, dz_ode, quad))
            .collect::<Result<_>>()?;
        let out = fresnel_apply(&samples, &grid, &spectral, h, medium.omega0);
        total *= trig_interpolate(&out, &grid, &spectral, tau[axis]);
    }
    Ok(total)
}
