//! Split-step Fourier solver for the rescaled Itô-Schrödinger equation
//!
//! ```text
//! du = (iη/(2εω)) Δu dz − (ω²R(0)/(8η²)) u dz + (iω/(2η)) u dB
//! ```
//!
//! Each step applies half a diffraction step in Fourier space, the unitary
//! phase screen `exp(iω δB/(2η))` in real space, and another half
//! diffraction step. The screen's mean is exactly the Itô damping factor, so
//! no separate damping is applied.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::Covariance;
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral, WaveField};
use crate::regime::ScalingRegime;

/// Largest exponent accepted by [`phase_compensate`] before `exp` overflows.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceProfile {
    PlaneWave,
    /// `u₀(y) = exp(-|y|²/(2w²))`.
    Gaussian { width: f64 },
}

impl SourceProfile {
    pub fn envelope(&self, y: &[f64]) -> f64 {
        match self {
            SourceProfile::PlaneWave => 1.0,
            SourceProfile::Gaussian { width } => {
                let y2: f64 = y.iter().map(|v| v * v).sum();
                (-y2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Source profile plus its tilt offset κ (the physical tilt is `k₀ + εκ`).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub profile: SourceProfile,
    pub tilt: Vec<f64>,
}

impl SourceSpec {
    pub fn plane_wave(dim: usize) -> Self {
        Self { profile: SourceProfile::PlaneWave, tilt: vec![0.0; dim] }
    }

    pub fn gaussian(width: f64, dim: usize) -> Self {
        Self { profile: SourceProfile::Gaussian { width }, tilt: vec![0.0; dim] }
    }

    pub fn with_tilt(mut self, tilt: Vec<f64>) -> Self {
        self.tilt = tilt;
        self
    }
}

/// Samples `u(0, x) = u₀(εx) exp(ik·x)` with `k = k₀ + εκ` at frequency ω₀.
pub fn init_source(regime: &ScalingRegime, grid: &Grid, spec: &SourceSpec) -> Result<WaveField> {
    if spec.tilt.len() != grid.dim() || regime.dim != grid.dim() {
        return Err(Error::InvalidArgument("source, regime and grid dimensions differ".into()));
    }
    if let SourceProfile::Gaussian { width } = spec.profile {
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!("source width {width} must be positive")));
        }
    }
    let k: Vec<f64> = regime.k0.iter().zip(&spec.tilt).map(|(k0, t)| k0 + regime.epsilon * t).collect();
    let nyq = grid.nyquist();
    for &ki in &k {
        if ki.abs() >= nyq {
            return Err(Error::TiltBeyondNyquist { tilt: ki, nyquist: nyq });
        }
    }
    if spec.profile == SourceProfile::PlaneWave {
        // a plane wave must be periodic on the cell
        let dk = grid.dual_spacing();
        for &ki in &k {
            let m = ki / dk;
            if (m - m.round()).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "plane-wave tilt {ki} is not a multiple of the dual spacing {dk}"
                )));
            }
        }
    }
    let eps = regime.epsilon;
    let values = grid
        .points()
        .iter()
        .map(|x| {
            let y: Vec<f64> = x.iter().map(|v| eps * v).collect();
            let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
            Complex64::from_polar(spec.profile.envelope(&y), phase)
        })
        .collect();
    WaveField::new(grid.clone(), values, 0.0, regime.omega0, spec.tilt.clone())
}

/// One realization of the medium increment `δB` over an axial step.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub values: Vec<f64>,
    pub dz: f64,
}

/// Spectral synthesis of real Gaussian screens with covariance `dz R(x-y)`
/// (periodized over the cell).
#[derive(Debug, Clone)]
pub struct ScreenSampler {
    grid: Grid,
    spectral: Spectral,
    /// Per-mode standard deviation for a unit step, already scaled by `n^d`
    /// to undo the normalization of the inverse transform.
    unit_std: Vec<f64>,
    partner: Vec<usize>,
}

impl ScreenSampler {
    pub fn new(model: &dyn Covariance, grid: &Grid) -> Result<Self> {
        if model.dim() != grid.dim() {
            return Err(Error::InvalidArgument("covariance and grid dimensions differ".into()));
        }
        let weight = grid.dual_cell_volume();
        let total = grid.len() as f64;
        let unit_std = grid
            .wavevectors()
            .iter()
            .map(|k| total * (model.eval_rhat(k).max(0.0) * weight).sqrt())
            .collect();
        let partner = (0..grid.len()).map(|i| grid.negated_index(i)).collect();
        Ok(Self { grid: grid.clone(), spectral: Spectral::new(grid), unit_std, partner })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sample(&self, dz: f64, rng: &mut impl Rng) -> PhaseScreen {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.sample_into(dz, rng, &mut buf);
        PhaseScreen { values: buf.iter().map(|v| v.re).collect(), dz }
    }

    fn sample_into(&self, dz: f64, rng: &mut impl Rng, buf: &mut [Complex64]) {
        let root = dz.max(0.0).sqrt();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for m in 0..buf.len() {
            let p = self.partner[m];
            let s = root * self.unit_std[m];
            if p == m {
                buf[m] = Complex64::new(s * rng.sample::<f64, _>(StandardNormal), 0.0);
            } else if p > m {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let z = Complex64::new(a, b) * (s * half);
                buf[m] = z;
                buf[p] = z.conj();
            }
        }
        self.spectral.inverse(buf);
    }
}

/// Standalone screen draw; builds a sampler each call.
pub fn make_screen(model: &dyn Covariance, grid: &Grid, dz: f64, rng: &mut impl Rng) -> Result<PhaseScreen> {
    if !(dz > 0.0) {
        return Err(Error::InvalidArgument(format!("dz = {dz} must be positive")));
    }
    Ok(ScreenSampler::new(model, grid)?.sample(dz, rng))
}

/// Stability/accuracy bound on the axial step: the per-step diffraction
/// phase at the highest wavenumber and the screen phase variance must both
/// stay below one.
pub fn dz_max(regime: &ScalingRegime, model: &dyn Covariance, grid: &Grid, omega: f64) -> f64 {
    let xi2 = grid.dim() as f64 * grid.nyquist().powi(2);
    let diffraction = 2.0 * regime.epsilon * omega / (regime.eta * xi2);
    let r0 = model.r0();
    let screen = if r0 > 0.0 { 4.0 * regime.eta.powi(2) / (omega * omega * r0) } else { f64::INFINITY };
    diffraction.min(screen)
}

/// Split-step propagator bound to one regime, medium and grid.
pub struct Simulator<'a> {
    regime: ScalingRegime,
    model: &'a dyn Covariance,
    grid: Grid,
    spectral: Spectral,
    sampler: ScreenSampler,
    dz: f64,
    k2: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(regime: &ScalingRegime, model: &'a dyn Covariance, grid: &Grid, dz: f64) -> Result<Self> {
        regime.validate()?;
        if regime.dim != grid.dim() {
            return Err(Error::InvalidArgument("regime and grid dimensions differ".into()));
        }
        if !(dz > 0.0) || !dz.is_finite() {
            return Err(Error::InvalidArgument(format!("dz = {dz} must be positive")));
        }
        let limit = dz_max(regime, model, grid, regime.omega0);
        if dz > limit {
            return Err(Error::StepTooLarge { dz, dz_max: limit });
        }
        Ok(Self {
            regime: regime.clone(),
            model,
            grid: grid.clone(),
            spectral: Spectral::new(grid),
            sampler: ScreenSampler::new(model, grid)?,
            dz,
            k2: grid.wavenumber_sq(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn regime(&self) -> &ScalingRegime {
        &self.regime
    }

    pub fn model(&self) -> &dyn Covariance {
        self.model
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn sampler(&self) -> &ScreenSampler {
        &self.sampler
    }

    /// Fourier multiplier of free propagation over `dz` at frequency ω.
    fn diffraction(&self, dz: f64, omega: f64) -> Vec<Complex64> {
        let c = -self.regime.eta * dz / (2.0 * self.regime.epsilon * omega);
        self.k2.iter().map(|k2| Complex64::from_polar(1.0, c * k2)).collect()
    }

    fn check_fields(&self, fields: &[WaveField]) -> Result<()> {
        let Some(first) = fields.first() else { return Ok(()) };
        for f in fields {
            if f.grid != self.grid || (f.z - first.z).abs() > 1e-12 * (1.0 + first.z.abs()) {
                return Err(Error::GridMismatch);
            }
            let limit = dz_max(&self.regime, self.model, &self.grid, f.omega);
            if self.dz > limit {
                return Err(Error::StepTooLarge { dz: self.dz, dz_max: limit });
            }
        }
        Ok(())
    }

    /// One unfused Strang step of length `dz`.
    pub fn step(&self, field: &WaveField, rng: &mut impl Rng) -> Result<WaveField> {
        self.check_fields(std::slice::from_ref(field))?;
        let half = self.diffraction(0.5 * self.dz, field.omega);
        let mut screen = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.sampler.sample_into(self.dz, rng, &mut screen);
        let mut buf = field.values.clone();
        self.spectral.forward(&mut buf);
        mul_assign(&mut buf, &half);
        self.spectral.inverse(&mut buf);
        let g = field.omega / (2.0 * self.regime.eta);
        for (u, b) in buf.iter_mut().zip(&screen) {
            *u *= Complex64::from_polar(1.0, g * b.re);
        }
        self.spectral.forward(&mut buf);
        mul_assign(&mut buf, &half);
        self.spectral.inverse(&mut buf);
        let mut out = field.clone();
        out.values = buf;
        out.z += self.dz;
        Ok(out)
    }

    /// Advances every field to `z_target` through the same medium
    /// realization. Steps are `Δz/⌈Δz/dz⌉`, never longer than `dz`.
    pub fn propagate_shared(&self, fields: &mut [WaveField], z_target: f64, rng: &mut impl Rng) -> Result<()> {
        self.check_fields(fields)?;
        let Some(first) = fields.first() else { return Ok(()) };
        let z0 = first.z;
        if z_target < z0 {
            return Err(Error::TargetBehind { target: z_target, current: z0 });
        }
        let span = z_target - z0;
        let nsteps = (span / self.dz - 1e-9).ceil().max(0.0) as usize;
        if nsteps == 0 {
            return Ok(());
        }
        let h = span / nsteps as f64;

        // per-frequency multipliers; fields usually share one frequency
        let mut plans: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = Vec::new();
        let plan_of: Vec<usize> = fields
            .iter()
            .map(|f| {
                if let Some(i) = plans.iter().position(|p| p.0 == f.omega) {
                    i
                } else {
                    plans.push((f.omega, self.diffraction(0.5 * h, f.omega), self.diffraction(h, f.omega)));
                    plans.len() - 1
                }
            })
            .collect();

        for (f, &p) in fields.iter_mut().zip(&plan_of) {
            self.spectral.forward(&mut f.values);
            mul_assign(&mut f.values, &plans[p].1);
        }
        let mut screen = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let mut phase: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); self.grid.len()]; plans.len()];
        for s in 0..nsteps {
            self.sampler.sample_into(h, rng, &mut screen);
            for (pi, plan) in plans.iter().enumerate() {
                let g = plan.0 / (2.0 * self.regime.eta);
                for (ph, b) in phase[pi].iter_mut().zip(&screen) {
                    *ph = Complex64::from_polar(1.0, g * b.re);
                }
            }
            let last = s + 1 == nsteps;
            for (f, &p) in fields.iter_mut().zip(&plan_of) {
                self.spectral.inverse(&mut f.values);
                mul_assign(&mut f.values, &phase[p]);
                self.spectral.forward(&mut f.values);
                mul_assign(&mut f.values, if last { &plans[p].1 } else { &plans[p].2 });
            }
        }
        for f in fields.iter_mut() {
            self.spectral.inverse(&mut f.values);
            f.z = z_target;
        }
        Ok(())
    }

    pub fn propagate(&self, field: &WaveField, z_target: f64, rng: &mut impl Rng) -> Result<WaveField> {
        let mut out = [field.clone()];
        self.propagate_shared(&mut out, z_target, rng)?;
        let [out] = out;
        Ok(out)
    }

    /// Propagates through increasing `checkpoints`, returning the field at
    /// each. The medium seen up to a checkpoint does not depend on the later
    /// ones.
    pub fn propagate_traced(&self, field: &WaveField, checkpoints: &[f64], rng: &mut impl Rng) -> Result<Vec<WaveField>> {
        let mut current = field.clone();
        let mut out = Vec::with_capacity(checkpoints.len());
        for &z in checkpoints {
            current = self.propagate(&current, z, rng)?;
            out.push(current.clone());
        }
        Ok(out)
    }

    pub fn propagate_pair_shared_noise(
        &self,
        a: &WaveField,
        b: &WaveField,
        z_target: f64,
        rng: &mut impl Rng,
    ) -> Result<(WaveField, WaveField)> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        let mut pair = [a.clone(), b.clone()];
        self.propagate_shared(&mut pair, z_target, rng)?;
        let [a, b] = pair;
        Ok((a, b))
    }

    /// Exact free (noise-free, undamped) propagation to `z_target`.
    pub fn free_propagate(&self, field: &WaveField, z_target: f64) -> Result<WaveField> {
        free_propagate(&self.regime, &self.spectral, field, z_target)
    }
}

/// Exact free-Schrödinger evolution by its Fourier multiplier.
pub fn free_propagate(regime: &ScalingRegime, spectral: &Spectral, field: &WaveField, z_target: f64) -> Result<WaveField> {
    if z_target < field.z {
        return Err(Error::TargetBehind { target: z_target, current: field.z });
    }
    let c = -regime.eta * (z_target - field.z) / (2.0 * regime.epsilon * field.omega);
    let mut buf = field.values.clone();
    spectral.forward(&mut buf);
    for (v, k2) in buf.iter_mut().zip(field.grid.wavenumber_sq()) {
        *v *= Complex64::from_polar(1.0, c * k2);
    }
    spectral.inverse(&mut buf);
    let mut out = field.clone();
    out.values = buf;
    out.z = z_target;
    Ok(out)
}

fn mul_assign(a: &mut [Complex64], b: &[Complex64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x *= y;
    }
}

/// Fourier-domain field with free diffraction and mean damping removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedField {
    /// ψ̂ in FFT order, continuum-normalized like [`WaveField::spectrum`].
    pub values: Vec<Complex64>,
    pub z: f64,
    pub omega: f64,
    pub tilt: Vec<f64>,
    pub grid: Grid,
}

/// `ψ̂(ξ) = û(ξ) exp(iηz|ξ|²/(2εω)) exp(ω²R(0)z/(8η²))`.
pub fn phase_compensate(
    field: &WaveField,
    regime: &ScalingRegime,
    model: &dyn Covariance,
    spectral: &Spectral,
) -> Result<CompensatedField> {
    let (eta, eps, w, z) = (regime.eta, regime.epsilon, field.omega, field.z);
    let exponent = w * w * model.r0() * z / (8.0 * eta * eta);
    if exponent > OVERFLOW_EXPONENT {
        return Err(Error::Overflow { exponent, limit: OVERFLOW_EXPONENT });
    }
    let gain = exponent.exp();
    let c = eta * z / (2.0 * eps * w);
    let mut values = field.spectrum(spectral);
    for (v, k2) in values.iter_mut().zip(field.grid.wavenumber_sq()) {
        *v *= Complex64::from_polar(gain, c * k2);
    }
    Ok(CompensatedField { values, z, omega: w, tilt: field.tilt.clone(), grid: field.grid.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::GaussianCovariance;
    use crate::rng::realization_rng;

    fn regime(eps: f64, eta: f64) -> ScalingRegime {
        ScalingRegime::new(eps, eta, 1.0, vec![0.0], 1.0, 1).unwrap()
    }

    #[test]
    fn plane_wave_source_is_ones() {
        let g = Grid::new(64, 16.0, 1).unwrap();
        let f = init_source(&regime(0.01, 0.25), &g, &SourceSpec::plane_wave(1)).unwrap();
        assert!(f.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn gaussian_source_half_width_scales_with_epsilon() {
        let g = Grid::new(1024, 512.0, 1).unwrap();
        let f = init_source(&regime(0.01, 0.25), &g, &SourceSpec::gaussian(1.0, 1)).unwrap();
        // x = 100 sits at index 256 + 200 on a spacing of 0.5
        let j = 512 + 200;
        assert!((g.axis()[j] - 100.0).abs() < 1e-12);
        assert!((f.values[j].re - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn tilt_beyond_nyquist_rejected() {
        let g = Grid::new(16, 16.0, 1).unwrap();
        let spec = SourceSpec::gaussian(1.0, 1).with_tilt(vec![400.0]);
        let err = init_source(&regime(0.01, 0.25), &g, &spec).unwrap_err();
        assert!(matches!(err, Error::TiltBeyondNyquist { .. }));
    }

    #[test]
    fn zero_step_screen_vanishes() {
        let g = Grid::new(32, 16.0, 1).unwrap();
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let s = ScreenSampler::new(&m, &g).unwrap().sample(0.0, &mut realization_rng(1, 0));
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noiseless_plane_wave_unchanged() {
        let g = Grid::new(64, 16.0, 1).unwrap();
        let m = GaussianCovariance::new(0.0, 1.0, 1).unwrap();
        let r = regime(0.01, 0.25);
        let sim = Simulator::new(&r, &m, &g, 5e-4).unwrap();
        let f = init_source(&r, &g, &SourceSpec::plane_wave(1)).unwrap();
        let out = sim.propagate(&f, 0.5, &mut realization_rng(1, 0)).unwrap();
        for v in &out.values {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn noiseless_gaussian_beam_matches_fresnel_solution() {
        let (eps, eta, w, kap) = (0.1, 0.25, 1.0, 4.0);
        let r = regime(eps, eta);
        let g = Grid::new(256, 160.0, 1).unwrap();
        let m = GaussianCovariance::new(0.0, 1.0, 1).unwrap();
        let sim = Simulator::new(&r, &m, &g, 1e-2).unwrap();
        let f = init_source(&r, &g, &SourceSpec::gaussian(w, 1).with_tilt(vec![kap])).unwrap();
        let z = 1.0;
        let out = sim.propagate(&f, z, &mut realization_rng(1, 0)).unwrap();

        // u_z = iD u_xx with D = η/(2εω)
        let dcoef = eta / (2.0 * eps);
        let s2 = (w / eps).powi(2);
        let k = eps * kap;
        let q = Complex64::new(s2, 2.0 * dcoef * z);
        let amp = (Complex64::new(s2, 0.0) / q).sqrt();
        let mut err = 0.0;
        for (x, v) in g.axis().iter().zip(&out.values) {
            let xs = x - 2.0 * dcoef * k * z;
            let exact = amp * (-(xs * xs) / (2.0 * q)).exp() * Complex64::from_polar(1.0, k * x - dcoef * k * k * z);
            err += (v - exact).norm_sqr() * g.spacing();
        }
        assert!(err.sqrt() < 1e-8, "L2 error {}", err.sqrt());
    }

    #[test]
    fn one_step_is_unitary() {
        let r = regime(0.01, 0.25);
        let g = Grid::new(256, 64.0, 1).unwrap();
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let sim = Simulator::new(&r, &m, &g, 5e-4).unwrap();
        let f = init_source(&r, &g, &SourceSpec::gaussian(0.2, 1)).unwrap();
        let e0 = f.energy();
        let out = sim.step(&f, &mut realization_rng(3, 0)).unwrap();
        assert!(((out.energy() - e0) / e0).abs() < 1e-12);
        assert!((out.z - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn fused_and_unfused_steps_agree() {
        let r = regime(0.01, 0.25);
        let g = Grid::new(128, 32.0, 1).unwrap();
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let sim = Simulator::new(&r, &m, &g, 5e-4).unwrap();
        let f = init_source(&r, &g, &SourceSpec::plane_wave(1)).unwrap();
        let fused = sim.propagate(&f, 10.0 * 5e-4, &mut realization_rng(9, 2)).unwrap();
        let mut rng = realization_rng(9, 2);
        let mut stepped = f.clone();
        for _ in 0..10 {
            stepped = sim.step(&stepped, &mut rng).unwrap();
        }
        for (a, b) in fused.values.iter().zip(&stepped.values) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn propagate_errors_and_identity() {
        let r = regime(0.01, 0.25);
        let g = Grid::new(64, 16.0, 1).unwrap();
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let sim = Simulator::new(&r, &m, &g, 5e-4).unwrap();
        let f = init_source(&r, &g, &SourceSpec::plane_wave(1)).unwrap();
        let same = sim.propagate(&f, 0.0, &mut realization_rng(1, 0)).unwrap();
        assert_eq!(same, f);
        let mut later = f.clone();
        later.z = 1.0;
        assert!(matches!(sim.propagate(&later, 0.5, &mut realization_rng(1, 0)), Err(Error::TargetBehind { .. })));
        assert!(matches!(Simulator::new(&r, &m, &g, 1.0), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn shared_noise_pair_of_identical_sources_stays_identical() {
        let r = regime(0.01, 0.25);
        let g = Grid::new(64, 16.0, 1).unwrap();
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let sim = Simulator::new(&r, &m, &g, 5e-4).unwrap();
        let f = init_source(&r, &g, &SourceSpec::gaussian(0.5, 1)).unwrap();
        let (a, b) = sim.propagate_pair_shared_noise(&f, &f, 0.05, &mut realization_rng(4, 0)).unwrap();
        assert_eq!(a.values, b.values);
        let (c, _) = sim.propagate_pair_shared_noise(&f, &f, 0.05, &mut realization_rng(5, 0)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn compensation_is_identity_at_origin_and_cancels_free_flow() {
        let r = regime(0.05, 0.25);
        let g = Grid::new(128, 128.0, 1).unwrap();
        let sp = Spectral::new(&g);
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let f = init_source(&r, &g, &SourceSpec::gaussian(1.0, 1)).unwrap();
        let psi0 = phase_compensate(&f, &r, &m, &sp).unwrap();
        assert_eq!(psi0.values, f.spectrum(&sp));
        let far = free_propagate(&r, &sp, &f, 0.7).unwrap();
        let psi = phase_compensate(&far, &r, &m, &sp).unwrap();
        let damp = (-(0.7 * m.r0()) / (8.0 * 0.25 * 0.25)).exp();
        for (a, b) in psi.values.iter().zip(&psi0.values) {
            assert!((a * damp - b).norm() < 1e-10);
        }
    }

    #[test]
    fn compensation_overflow_guard() {
        let r = regime(0.01, 0.02);
        let g = Grid::new(16, 16.0, 1).unwrap();
        let sp = Spectral::new(&g);
        let m = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
        let mut f = init_source(&r, &g, &SourceSpec::plane_wave(1)).unwrap();
        f.z = 3.0;
        assert!(matches!(phase_compensate(&f, &r, &m, &sp), Err(Error::Overflow { .. })));
    }
}
