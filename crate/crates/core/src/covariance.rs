//! Lateral covariance models of the random medium.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use libm::erf;

use crate::error::{Error, Result};

/// A stationary isotropic-Hessian covariance `R` together with its spectrum.
///
/// `eval_rhat` uses the convention `R̂(k) = ∫ R(x) e^{-ik·x} dx`, so that
/// `R(0) = (2π)^{-d} ∫ R̂(k) dk`.
pub trait Covariance: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_r(&self, x: &[f64]) -> f64;
    fn eval_rhat(&self, k: &[f64]) -> f64;
    /// `R(0)`.
    fn r0(&self) -> f64;
    /// σ² with `-∇²R(0) = σ² I`.
    fn sigma2(&self) -> f64;
    /// A length over which `R` decays; used to size quadratures.
    fn length_scale(&self) -> f64;

    fn eval_q(&self, x: &[f64]) -> f64 {
        self.eval_r(x) - self.r0()
    }

    /// `∫₀¹ Q(a + s b) ds`, the path average of `Q` along a segment.
    fn q_segment_mean(&self, a: &[f64], b: &[f64]) -> f64 {
        let (nodes, weights) = gauss_legendre(32);
        let mut p = vec![0.0; a.len()];
        nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                let s = 0.5 * (t + 1.0);
                for ((pi, ai), bi) in p.iter_mut().zip(a).zip(b) {
                    *pi = ai + s * bi;
                }
                0.5 * w * self.eval_q(&p)
            })
            .sum()
    }

    /// Draw a wavevector from the normalized spectral density
    /// `R̂(k) / ((2π)^d R(0))`.
    fn sample_jump(&self, rng: &mut dyn rand::RngCore) -> Vec<f64>;
}

/// `R(x) = r0 exp(-|x|²/(2ℓ²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCovariance {
    pub r0: f64,
    pub ell: f64,
    pub dim: usize,
}

impl GaussianCovariance {
    pub fn new(r0: f64, ell: f64, dim: usize) -> Result<Self> {
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(Error::InvalidArgument(format!("r0 = {r0} must be non-negative")));
        }
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(Error::InvalidArgument(format!("correlation length {ell} must be positive")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        Ok(Self { r0, ell, dim })
    }

    /// Closed form of `∫₀¹ Q(a + s b) ds`. Along the segment `|a+sb|²` is
    /// quadratic in `s`, so the average is an error-function integral.
    pub fn q_segment_mean_exact(&self, a: &[f64], b: &[f64]) -> f64 {
        let l2 = self.ell * self.ell;
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let aa: f64 = a.iter().map(|v| v * v).sum();
        if bb == 0.0 {
            return self.r0 * (-aa / (2.0 * l2)).exp() - self.r0;
        }
        // |a + s b|² = bb (s + ab/bb)² + aa - ab²/bb
        let s0 = ab / bb;
        let rest = (aa - ab * ab / bb).max(0.0);
        let scale = (bb / (2.0 * l2)).sqrt();
        let integral = (PI.sqrt() / (2.0 * scale)) * (erf(scale * (1.0 + s0)) - erf(scale * s0));
        self.r0 * (-rest / (2.0 * l2)).exp() * integral - self.r0
    }
}

impl Covariance for GaussianCovariance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_r(&self, x: &[f64]) -> f64 {
        let x2: f64 = x.iter().map(|v| v * v).sum();
        self.r0 * (-x2 / (2.0 * self.ell * self.ell)).exp()
    }

    fn eval_rhat(&self, k: &[f64]) -> f64 {
        let k2: f64 = k.iter().map(|v| v * v).sum();
        let l2 = self.ell * self.ell;
        self.r0 * (2.0 * PI * l2).powf(0.5 * self.dim as f64) * (-0.5 * l2 * k2).exp()
    }

    fn r0(&self) -> f64 {
        self.r0
    }

    fn sigma2(&self) -> f64 {
        self.r0 / (self.ell * self.ell)
    }

    fn length_scale(&self) -> f64 {
        self.ell
    }

    fn sample_jump(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal) / self.ell).collect()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Trapezoid quadrature of `f` over the cube `[-half, half]^d`.
fn cube_quadrature(dim: usize, half: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 2.0 * half / (n - 1) as f64;
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut sum = 0.0;
    match dim {
        1 => {
            for i in 0..n {
                sum += w(i) * f(&[-half + i as f64 * h]);
            }
            sum * h
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    sum += w(i) * w(j) * f(&[-half + i as f64 * h, -half + j as f64 * h]);
                }
            }
            sum * h * h
        }
    }
}

/// Checks the medium assumptions: non-negative spectrum, symmetry, strict
/// maximum and negative-definite Hessian at the origin, Fourier inversion
/// of `R(0)` and `Σ`, and integrability of `R` along the axes.
pub fn validate(model: &dyn Covariance) -> ValidationReport {
    let d = model.dim();
    let ell = model.length_scale();
    let r0 = model.r0();
    let s2 = model.sigma2();
    let mut checks = Vec::new();

    let kmax = 12.0 / ell;
    let nk = if d == 1 { 2001 } else { 241 };
    let mut min_rhat = f64::INFINITY;
    let hk = 2.0 * kmax / (nk - 1) as f64;
    for i in 0..nk {
        let ki = -kmax + i as f64 * hk;
        if d == 1 {
            min_rhat = min_rhat.min(model.eval_rhat(&[ki]));
        } else {
            for j in 0..nk {
                min_rhat = min_rhat.min(model.eval_rhat(&[ki, -kmax + j as f64 * hk]));
            }
        }
    }
    checks.push(Check {
        name: "spectrum_nonnegative",
        passed: min_rhat >= 0.0,
        detail: format!("min R̂ on grid = {min_rhat:.3e}"),
    });

    let samples: Vec<Vec<f64>> = (1..=40)
        .map(|i| {
            let t = i as f64 * 0.137 * ell;
            if d == 1 { vec![t] } else { vec![t, -0.61 * t + 0.05 * ell] }
        })
        .collect();
    let sym_err = samples
        .iter()
        .map(|x| {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            (model.eval_r(x) - model.eval_r(&neg)).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "symmetric",
        passed: sym_err <= 1e-14 * r0.max(1e-300),
        detail: format!("max |R(x) - R(-x)| = {sym_err:.3e}"),
    });

    let strict = samples.iter().all(|x| model.eval_r(x) < r0);
    checks.push(Check { name: "strict_maximum", passed: strict, detail: format!("R(0) = {r0}") });

    let hess = fd_hessian(model, 1e-3 * ell);
    let hess_ok = match d {
        1 => hess[0][0] < 0.0,
        _ => hess[0][0] < 0.0 && hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0] > 0.0,
    };
    let hess_err = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (hess[i][j] + if i == j { s2 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "hessian_negative_definite",
        passed: hess_ok && hess_err < 1e-6 * s2.max(1.0),
        detail: format!("max |∂²R(0) + σ²I| = {hess_err:.3e}"),
    });

    let norm = (2.0 * PI).powi(d as i32);
    let r0_quad = cube_quadrature(d, kmax, nk, |k| model.eval_rhat(k)) / norm;
    checks.push(Check {
        name: "fourier_inversion",
        passed: (r0_quad - r0).abs() < 1e-8 * r0.max(1.0),
        detail: format!("(2π)^-d ∫R̂ = {r0_quad:.12}, R(0) = {r0}"),
    });

    let sig = sigma_quadrature(model);
    let sig_err = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (sig[i][j] - if i == j { s2 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "sigma_quadrature",
        passed: sig_err < 1e-6 * s2.max(1.0),
        detail: format!("max |Σ_quad - σ²I| = {sig_err:.3e}"),
    });

    let mut tail_ok = true;
    let mut worst = 0.0f64;
    for axis in 0..d {
        let along = |t: f64| {
            let mut x = vec![0.0; d];
            x[axis] = t;
            model.eval_r(&x).abs()
        };
        let inner = cube_quadrature(1, 20.0 * ell, 4001, |t| along(t[0]));
        let outer = cube_quadrature(1, 40.0 * ell, 8001, |t| along(t[0]));
        let tail = (outer - inner).abs() / inner.max(1e-300);
        worst = worst.max(tail);
        tail_ok &= inner.is_finite() && tail < 1e-6;
    }
    checks.push(Check {
        name: "integrable_along_axes",
        passed: tail_ok,
        detail: format!("relative tail mass beyond 20ℓ = {worst:.3e}"),
    });

    ValidationReport { checks }
}

/// Central finite-difference Hessian of `R` at the origin.
pub fn fd_hessian(model: &dyn Covariance, h: f64) -> Vec<Vec<f64>> {
    let d = model.dim();
    let r = |x: &[f64]| model.eval_r(x);
    let mut out = vec![vec![0.0; d]; d];
    let r00 = r(&vec![0.0; d]);
    for i in 0..d {
        let mut p = vec![0.0; d];
        p[i] = h;
        let rp = r(&p);
        p[i] = -h;
        let rm = r(&p);
        out[i][i] = (rp - 2.0 * r00 + rm) / (h * h);
        for j in (i + 1)..d {
            let mut x = vec![0.0; d];
            let mut at = |si: f64, sj: f64| {
                x[i] = si * h;
                x[j] = sj * h;
                r(&x)
            };
            let v = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// `Σ_ij = (2π)^{-d} ∫ k_i k_j R̂(k) dk` by quadrature.
pub fn sigma_quadrature(model: &dyn Covariance) -> Vec<Vec<f64>> {
    let d = model.dim();
    let kmax = 12.0 / model.length_scale();
    let nk = if d == 1 { 2001 } else { 241 };
    let norm = (2.0 * PI).powi(d as i32);
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            out[i][j] = cube_quadrature(d, kmax, nk, |k| k[i] * k[j] * model.eval_rhat(k)) / norm;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_values() {
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        assert_eq!(m.eval_r(&[0.0]), 1.0);
        assert!((m.eval_r(&[1.0]) - 0.6065306597126334).abs() < 1e-15);
        assert!((m.eval_rhat(&[0.0]) - 2.5066282746310002).abs() < 1e-14);
        assert_eq!(m.eval_q(&[0.0]), 0.0);
        assert_eq!(m.sigma2(), 1.0);
    }

    #[test]
    fn rhat_is_fourier_transform_of_r() {
        // direct quadrature of ∫R(x)e^{-ikx}dx
        let m = GaussianCovariance::new(0.7, 1.3, 1).unwrap();
        for &k in &[0.0, 0.4, 1.1, 2.5] {
            let ft = cube_quadrature(1, 20.0, 4001, |x| m.eval_r(x) * (k * x[0]).cos());
            assert!((ft - m.eval_rhat(&[k])).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn gaussian_passes_validation() {
        for d in [1, 2] {
            let m = GaussianCovariance::new(1.0, 1.0, d).unwrap();
            let report = validate(&m);
            assert!(report.all_passed(), "{report:?}");
        }
    }

    struct Oscillating;

    impl Covariance for Oscillating {
        fn dim(&self) -> usize {
            1
        }
        fn eval_r(&self, x: &[f64]) -> f64 {
            (-x[0] * x[0] / 2.0).exp() * (2.0 * x[0]).cos()
        }
        fn eval_rhat(&self, k: &[f64]) -> f64 {
            // spectrum of a cosine-modulated gaussian minus a central notch
            let g = |q: f64| (2.0 * PI).sqrt() * (-q * q / 2.0).exp();
            0.5 * (g(k[0] - 2.0) + g(k[0] + 2.0)) - 0.3 * g(3.0 * k[0])
        }
        fn r0(&self) -> f64 {
            1.0
        }
        fn sigma2(&self) -> f64 {
            5.0
        }
        fn length_scale(&self) -> f64 {
            1.0
        }
        fn sample_jump(&self, _rng: &mut dyn rand::RngCore) -> Vec<f64> {
            vec![0.0]
        }
    }

    #[test]
    fn negative_spectrum_fails_positivity() {
        let report = validate(&Oscillating);
        assert!(!report.check("spectrum_nonnegative").unwrap().passed);
        assert!(!report.all_passed());
    }

    #[test]
    fn sigma_quadrature_matches_identity() {
        let m = GaussianCovariance::new(2.0, 0.8, 2).unwrap();
        let s = sigma_quadrature(&m);
        assert!((s[0][0] - m.sigma2()).abs() < 1e-6);
        assert!((s[1][1] - m.sigma2()).abs() < 1e-6);
        assert!(s[0][1].abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let s6: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((s6 - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn segment_mean_closed_form_matches_quadrature() {
        let m = GaussianCovariance::new(1.0, 1.0, 2).unwrap();
        let a = [0.3, -0.2];
        let b = [1.5, 0.7];
        let (nodes, weights) = gauss_legendre(32);
        let quad: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                let s = 0.5 * (t + 1.0);
                0.5 * w * m.eval_q(&[a[0] + s * b[0], a[1] + s * b[1]])
            })
            .sum();
        assert!((quad - m.q_segment_mean(&a, &b)).abs() < 1e-14);
        assert!((m.q_segment_mean(&a, &[0.0, 0.0]) - m.eval_q(&a)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn q_nonpositive_and_consistent(x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let m = GaussianCovariance::new(1.3, 0.9, 2).unwrap();
            let q = m.eval_q(&[x, y]);
            prop_assert!(q <= 0.0);
            prop_assert_eq!(q, m.eval_r(&[x, y]) - m.eval_r(&[0.0, 0.0]));
            prop_assert_eq!(m.eval_r(&[x, y]), m.eval_r(&[-x, -y]));
            prop_assert!(m.eval_rhat(&[x, y]) >= 0.0);
        }

        #[test]
        fn q_small_x_is_quadratic(x in -0.05..0.05f64) {
            let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
            let q = m.eval_q(&[x]);
            prop_assert!((q + m.sigma2() * x * x / 2.0).abs() <= 0.2 * x.powi(4) + 1e-16);
        }
    }
}
