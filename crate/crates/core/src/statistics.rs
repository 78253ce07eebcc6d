//! Ensemble moment estimators, the Gaussian summation rule and checks of the
//! complex-Gaussian speckle limit.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Batch size for jackknife standard errors once the ensemble is large
/// enough to form at least two full batches.
pub const BATCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl MomentEstimate {
    /// `|value − target| / stderr`.
    pub fn z_score(&self, target: Complex64) -> f64 {
        (self.value - target).norm() / self.stderr.max(f64::MIN_POSITIVE)
    }

    pub fn within(&self, target: Complex64, k: f64) -> bool {
        (self.value - target).norm() <= k * self.stderr
    }
}

/// Neumaier-compensated complex sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn add(&mut self, x: Complex64) {
        neumaier(&mut self.sum.re, &mut self.comp.re, x.re);
        neumaier(&mut self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

pub fn compensated_mean(xs: impl IntoIterator<Item = Complex64>) -> (Complex64, usize) {
    let mut acc = CompensatedSum::default();
    let mut n = 0;
    for x in xs {
        acc.add(x);
        n += 1;
    }
    (acc.value() / n.max(1) as f64, n)
}

/// Jackknife over batch means for a function of the means of several
/// per-realization quantities. `samples[i][k]` is quantity `k` in
/// realization `i`.
pub fn jackknife<F>(samples: &[Vec<Complex64>], f: F) -> Result<MomentEstimate>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let width = samples[0].len();
    let batch = if n >= 2 * BATCH { BATCH } else { 1 };
    let nb = n / batch;
    let used = nb * batch;
    let mut batch_sums = vec![vec![CompensatedSum::default(); width]; nb];
    let mut total = vec![CompensatedSum::default(); width];
    for (i, s) in samples.iter().enumerate() {
        if s.len() != width {
            return Err(Error::InvalidArgument("ragged sample vectors".into()));
        }
        for (k, v) in s.iter().enumerate() {
            total[k].add(*v);
            if i < used {
                batch_sums[i / batch][k].add(*v);
            }
        }
    }
    let full: Vec<Complex64> = total.iter().map(|s| s.value() / n as f64).collect();
    let used_total: Vec<Complex64> = (0..width)
        .map(|k| {
            let mut acc = CompensatedSum::default();
            for b in &batch_sums {
                acc.merge(&b[k]);
            }
            acc.value()
        })
        .collect();
    let loo: Vec<Complex64> = batch_sums
        .iter()
        .map(|b| {
            let means: Vec<Complex64> = (0..width)
                .map(|k| (used_total[k] - b[k].value()) / (used - batch) as f64)
                .collect();
            f(&means)
        })
        .collect();
    let (center, _) = compensated_mean(loo.iter().copied());
    let var: f64 = loo.iter().map(|v| (v - center).norm_sqr()).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    Ok(MomentEstimate { value: f(&full), stderr: var.sqrt(), n_samples: n })
}

/// Sample mean with a jackknife standard error.
pub fn estimate_mean(samples: &[Complex64]) -> Result<MomentEstimate> {
    let rows: Vec<Vec<Complex64>> = samples.iter().map(|v| vec![*v]).collect();
    jackknife(&rows, |m| m[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentRequest {
    pub p: usize,
    pub q: usize,
}

impl MomentRequest {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 || p + q > 4 {
            return Err(Error::InvalidArgument(format!("moment order p + q = {} must be in 1..=4", p + q)));
        }
        Ok(Self { p, q })
    }

    /// `∏_{j<p} u_j ∏_{l≥p} u_l*` for one realization's point values.
    pub fn product(&self, values: &[Complex64]) -> Complex64 {
        let (direct, conj) = values.split_at(self.p);
        direct.iter().product::<Complex64>() * conj.iter().map(|v| v.conj()).product::<Complex64>()
    }
}

/// Estimates `E[∏ u(x_j) ∏ u*(x_l)]` from per-realization values at the
/// `p + q` mapped points.
pub fn estimate_moment(samples: &[Vec<Complex64>], req: MomentRequest) -> Result<MomentEstimate> {
    if let Some(bad) = samples.iter().find(|s| s.len() != req.p + req.q) {
        return Err(Error::InvalidArgument(format!("expected {} point values, got {}", req.p + req.q, bad.len())));
    }
    let prods: Vec<Complex64> = samples.iter().map(|s| req.product(s)).collect();
    estimate_mean(&prods)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Gaussian summation rule: `Σ_π ∏_j m[j][π(j)]` for `p = q`, zero
/// otherwise. `m[j][l]` is the second moment of direct factor `j` with
/// conjugated factor `l`.
pub fn gaussian_summation_prediction(m: &[Vec<Complex64>], p: usize, q: usize) -> Complex64 {
    if p != q {
        return Complex64::new(0.0, 0.0);
    }
    permutations(p)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(j, &l)| m[j][l]).product::<Complex64>())
        .sum()
}

/// Quantities collected per realization for a two-point Gaussianity check.
const G_WIDTH: usize = 8;

/// Per-realization averages over (translated) point pairs `(u₁, u₂)`:
/// `|u₁|²|u₂|², |u₁|², |u₂|², u₁u₂*, |u₁|⁴, |u₂|⁴, u₁u₂u₁*, u₁u₂`.
pub fn gaussianity_row(pairs: &[(Complex64, Complex64)]) -> Vec<Complex64> {
    let mut acc = vec![CompensatedSum::default(); G_WIDTH];
    for &(a, b) in pairs {
        let (ia, ib) = (a.norm_sqr(), b.norm_sqr());
        let row = [
            Complex64::new(ia * ib, 0.0),
            Complex64::new(ia, 0.0),
            Complex64::new(ib, 0.0),
            a * b.conj(),
            Complex64::new(ia * ia, 0.0),
            Complex64::new(ib * ib, 0.0),
            a * b * a.conj(),
            a * b,
        ];
        for (s, v) in acc.iter_mut().zip(row) {
            s.add(v);
        }
    }
    let n = pairs.len().max(1) as f64;
    acc.iter().map(|s| s.value() / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianityReport {
    /// `μ̂₂,₂ − (μ̂₁₁(1,1)μ̂₁₁(2,2) + μ̂₁₁(1,2)μ̂₁₁(2,1))`.
    pub deviation: MomentEstimate,
    pub mu22: MomentEstimate,
    pub prediction: Complex64,
    pub mu21: MomentEstimate,
    pub mu20: MomentEstimate,
    /// Speckle contrast at the two points.
    pub contrast: [MomentEstimate; 2],
    pub n_realizations: usize,
}

impl GaussianityReport {
    pub fn deviation_z(&self) -> f64 {
        self.deviation.z_score(Complex64::new(0.0, 0.0))
    }

    pub fn z_scores(&self) -> Vec<(&'static str, f64)> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        vec![
            ("mu22_deviation", self.deviation_z()),
            ("mu21", self.mu21.z_score(zero)),
            ("mu20", self.mu20.z_score(zero)),
            ("contrast_1", self.contrast[0].z_score(one)),
            ("contrast_2", self.contrast[1].z_score(one)),
        ]
    }
}

fn contrast(m2: Complex64, m4: Complex64) -> Complex64 {
    Complex64::new((m4.re - m2.re * m2.re).max(0.0).sqrt() / m2.re, 0.0)
}

/// Compares the fourth moment at two points with the Gaussian summation
/// rule built from estimated second moments. `rows` come from
/// [`gaussianity_row`], one per realization.
pub fn gaussianity_report(rows: &[Vec<Complex64>]) -> Result<GaussianityReport> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let predict = |m: &[Complex64]| {
        let mm = vec![vec![m[1], m[3]], vec![m[3].conj(), m[2]]];
        gaussian_summation_prediction(&mm, 2, 2)
    };
    let deviation = jackknife(rows, |m| m[0] - predict(m))?;
    let mu22 = jackknife(rows, |m| m[0])?;
    let full: Vec<Complex64> = (0..G_WIDTH).map(|k| compensated_mean(rows.iter().map(|r| r[k])).0).collect();
    Ok(GaussianityReport {
        deviation,
        mu22,
        prediction: predict(&full),
        mu21: jackknife(rows, |m| m[6])?,
        mu20: jackknife(rows, |m| m[7])?,
        contrast: [jackknife(rows, |m| contrast(m[1], m[4]))?, jackknife(rows, |m| contrast(m[2], m[5]))?],
        n_realizations: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstMomentReport {
    pub mean: MomentEstimate,
    /// Modulus of the noise-free field at the same point.
    pub free_abs: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub expected_ratio: f64,
    pub z_score: f64,
}

/// `|Ê u| / |u_free|` against `exp(−ω²R(0)z/(8η²))`. `samples` are
/// per-realization values (or per-realization averages over translates) of
/// the field at one point, `free` the noise-free field there.
pub fn first_moment_check(samples: &[Complex64], free: Complex64, damping_exponent: f64) -> Result<FirstMomentReport> {
    let mean = estimate_mean(samples)?;
    let free_abs = free.norm();
    if free_abs == 0.0 {
        return Err(Error::InvalidArgument("free field vanishes at the check point".into()));
    }
    let expected_ratio = (-damping_exponent).exp();
    // the phase of the mean equals that of the free field
    let target = free * expected_ratio;
    let ratio = mean.value.norm() / free_abs;
    let ratio_stderr = mean.stderr / free_abs;
    let z_score = if mean.stderr > 0.0 {
        (mean.value - target).norm() / mean.stderr
    } else if (mean.value - target).norm() <= 1e-12 * free_abs {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(FirstMomentReport { mean, free_abs, ratio, ratio_stderr, expected_ratio, z_score })
}

/// Partial sum of `Σ_n cⁿ (2n)!/n! Σ_{n₁+…+n_p=2n} 1/(n₁!⋯n_p!)` over
/// `n ≤ n_max`. Terms are accumulated in the log domain and summed with
/// compensation.
pub fn factorial_sum_identity(p: usize, c: f64, n_max: usize) -> Result<f64> {
    if p == 0 || !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("need p >= 1 and c >= 0, got p = {p}, c = {c}")));
    }
    let m_max = 2 * n_max;
    // s[m] = Σ over compositions of m into p parts of 1/∏ n_i!, built by
    // convolving p copies of 1/j!
    let inv_fact: Vec<f64> = (0..=m_max).map(|j| (-libm::lgamma(j as f64 + 1.0)).exp()).collect();
    let mut s = vec![0.0; m_max + 1];
    s[0] = 1.0;
    for _ in 0..p {
        let mut next = vec![0.0; m_max + 1];
        for (m, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut comp = 0.0;
            for j in 0..=m {
                neumaier(&mut acc, &mut comp, s[m - j] * inv_fact[j]);
            }
            *slot = acc + comp;
        }
        s = next;
    }
    let (mut sum, mut comp) = (0.0, 0.0);
    for n in 0..=n_max {
        let term = if c == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            let log = n as f64 * c.ln() + libm::lgamma(2.0 * n as f64 + 1.0) - libm::lgamma(n as f64 + 1.0) + s[2 * n].ln();
            if log > 709.0 {
                return Err(Error::Overflow { exponent: log, limit: 709.0 });
            }
            log.exp()
        };
        neumaier(&mut sum, &mut comp, term);
    }
    Ok(sum + comp)
}

/// Smallest `n_max` whose tail bound is below `tol` relative to `e^{p²c}`.
/// The n-th term equals `(p²c)ⁿ/n!`, so the tail past `N` is at most the
/// next term over `1 − p²c/(N+2)`.
pub fn factorial_sum_nmax(p: usize, c: f64, tol: f64) -> usize {
    let x = (p * p) as f64 * c;
    if x == 0.0 {
        return 0;
    }
    let mut n = 0usize;
    loop {
        let ratio = x / (n as f64 + 2.0);
        if ratio < 1.0 {
            let log_next = (n + 1) as f64 * x.ln() - libm::lgamma(n as f64 + 2.0);
            let bound = log_next.exp() / (1.0 - ratio);
            if bound < tol * x.exp() {
                return n;
            }
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::realization_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn circular(n: usize, var: f64, seed: u64) -> Vec<Complex64> {
        let mut rng = realization_rng(seed, 0);
        let s = (var / 2.0).sqrt();
        (0..n)
            .map(|_| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    #[test]
    fn circular_gaussian_moments() {
        let zs = circular(20000, 2.0, 11);
        let one = |v: &Complex64| vec![*v];
        let rows: Vec<Vec<Complex64>> = zs.iter().map(one).collect();
        let m11 = estimate_moment(&zs.iter().map(|v| vec![*v, *v]).collect::<Vec<_>>(), MomentRequest::new(1, 1).unwrap()).unwrap();
        assert!(m11.within(Complex64::new(2.0, 0.0), 3.0), "{m11:?}");
        let m20 = estimate_moment(&zs.iter().map(|v| vec![*v, *v]).collect::<Vec<_>>(), MomentRequest::new(2, 0).unwrap()).unwrap();
        assert!(m20.within(Complex64::new(0.0, 0.0), 3.0), "{m20:?}");
        let m22 = estimate_moment(&zs.iter().map(|v| vec![*v, *v, *v, *v]).collect::<Vec<_>>(), MomentRequest::new(2, 2).unwrap()).unwrap();
        assert!(m22.within(Complex64::new(8.0, 0.0), 3.0), "{m22:?}");
        assert_eq!(rows.len(), 20000);
    }

    #[test]
    fn moment_needs_two_samples() {
        let err = estimate_mean(&[Complex64::new(1.0, 0.0)]).unwrap_err();
        assert_eq!(err, Error::InsufficientSamples { needed: 2, got: 1 });
        assert!(MomentRequest::new(3, 2).is_err());
        assert!(MomentRequest::new(0, 0).is_err());
    }

    #[test]
    fn jackknife_of_mean_matches_batch_standard_error() {
        let zs = circular(1000, 1.0, 5);
        let est = estimate_mean(&zs).unwrap();
        let means: Vec<Complex64> = zs.chunks(BATCH).map(|c| c.iter().sum::<Complex64>() / BATCH as f64).collect();
        let mu = means.iter().sum::<Complex64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - mu).norm_sqr()).sum::<f64>() / (means.len() - 1) as f64;
        assert!((est.stderr - (var / means.len() as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summation_rule_small_cases() {
        let a = Complex64::new(0.3, 0.1);
        assert_eq!(gaussian_summation_prediction(&[vec![a]], 1, 1), a);
        let m = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.2, 0.3)], vec![Complex64::new(0.2, -0.3), Complex64::new(2.0, 0.0)]];
        let expected = m[0][0] * m[1][1] + m[0][1] * m[1][0];
        assert!((gaussian_summation_prediction(&m, 2, 2) - expected).norm() < 1e-15);
        assert_eq!(gaussian_summation_prediction(&m, 2, 1), Complex64::new(0.0, 0.0));
        let same = vec![vec![a, a], vec![a, a]];
        assert!((gaussian_summation_prediction(&same, 2, 2) - 2.0 * a * a).norm() < 1e-15);
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn gaussianity_of_synthetic_correlated_pair() {
        let z1 = circular(5000, 1.0, 21);
        let z2 = circular(5000, 1.0, 22);
        let rho = 0.6;
        let rows: Vec<Vec<Complex64>> = z1
            .iter()
            .zip(&z2)
            .map(|(a, b)| gaussianity_row(&[(*a, a * rho + b * (1.0 - rho * rho).sqrt())]))
            .collect();
        let rep = gaussianity_report(&rows).unwrap();
        assert!(rep.deviation_z() < 3.0, "{rep:?}");
        assert!(rep.mu21.within(Complex64::new(0.0, 0.0), 3.0));
        assert!(rep.mu20.within(Complex64::new(0.0, 0.0), 3.0));
        assert!((rep.contrast[0].value.re - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_field_has_zero_contrast() {
        let rows: Vec<Vec<Complex64>> = (0..100).map(|_| gaussianity_row(&[(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0))])).collect();
        let rep = gaussianity_report(&rows).unwrap();
        assert_eq!(rep.contrast[0].value.re, 0.0);
        assert!(rep.contrast[0].z_score(Complex64::new(1.0, 0.0)) > 1e6);
    }

    #[test]
    fn first_moment_exact_at_origin() {
        let samples = vec![Complex64::new(0.5, 0.5); 10];
        let rep = first_moment_check(&samples, Complex64::new(0.5, 0.5), 0.0).unwrap();
        assert_eq!(rep.ratio, 1.0);
        assert_eq!(rep.z_score, 0.0);
    }

    #[test]
    fn factorial_identity_values() {
        assert_eq!(factorial_sum_identity(3, 0.0, 10).unwrap(), 1.0);
        let v = factorial_sum_identity(1, 0.3, factorial_sum_nmax(1, 0.3, 1e-13)).unwrap();
        assert!((v - 0.3f64.exp()).abs() < 1e-13);
        let v = factorial_sum_identity(2, 0.5, factorial_sum_nmax(2, 0.5, 1e-13)).unwrap();
        assert!((v - 7.38905609893065).abs() < 1e-10);
    }

    #[test]
    fn factorial_identity_monotone_from_below() {
        let target = (9.0f64 * 0.5).exp();
        let mut prev = 0.0;
        for n in 0..40 {
            let v = factorial_sum_identity(3, 0.5, n).unwrap();
            assert!(v >= prev && v <= target * (1.0 + 1e-14));
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn global_phase_rotation(theta in 0.0..std::f64::consts::TAU, p in 0usize..=2, q in 0usize..=2, seed in 0u64..50) {
            prop_assume!(p + q > 0);
            let zs = circular(200, 1.0, seed);
            let req = MomentRequest::new(p, q).unwrap();
            let rows: Vec<Vec<Complex64>> = zs.chunks(p + q).filter(|c| c.len() == p + q).map(|c| c.to_vec()).collect();
            let rot = Complex64::from_polar(1.0, theta);
            let rotated: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|v| v * rot).collect()).collect();
            let a = estimate_moment(&rows, req).unwrap().value;
            let b = estimate_moment(&rotated, req).unwrap().value;
            let expect = a * Complex64::from_polar(1.0, (p as f64 - q as f64) * theta);
            prop_assert!((b - expect).norm() < 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn reordering_keeps_the_estimate(seed in 0u64..50, shift in 1usize..150) {
            let zs = circular(300, 1.0, seed);
            let mut rolled = zs.clone();
            rolled.rotate_left(shift);
            let a = estimate_mean(&zs).unwrap();
            let b = estimate_mean(&rolled).unwrap();
            prop_assert!((a.value - b.value).norm() < 1e-15);
        }
    }
}
