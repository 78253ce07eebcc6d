//! Experiment pipelines.

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use speckle_core::analytic::{m11_omega0_explicit, ZetaQuadrature};
use speckle_core::covariance::validate;
use speckle_core::jump::{brownian_limit_check, JumpProcessParams};
use speckle_core::memory::{
    chroma_argmax, chroma_improvement, chroma_profile, h_opt, spectral_shift, symmetric_grid, tilt_correlation, tilt_mc_scan,
    tilt_optimum, tilt_width_ratio, ChromaScan, TiltScan,
};
use speckle_core::rng::run_ensemble;
use speckle_core::simulator::dz_max;
use speckle_core::statistics::{
    estimate_mean, first_moment_check, gaussianity_report, gaussianity_row, jackknife, MomentEstimate,
};
use speckle_core::{init_source, Covariance, Error, Simulator, WaveField};

use crate::config::{ExperimentConfig, ExperimentKind, Profile};

/// One output row. `p`, `q` and `points` are set for moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub series: String,
    pub x: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub abs: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

impl Row {
    pub fn real(series: &str, x: f64, value: f64) -> Self {
        Self::complex(series, x, Complex64::new(value, 0.0), 0.0, 0)
    }

    pub fn complex(series: &str, x: f64, value: Complex64, stderr: f64, n: usize) -> Self {
        Self {
            series: series.into(),
            x,
            value_re: value.re,
            value_im: value.im,
            abs: value.norm(),
            stderr,
            n,
            p: None,
            q: None,
            points: None,
        }
    }

    pub fn estimate(series: &str, x: f64, e: &MomentEstimate) -> Self {
        Self::complex(series, x, e.value, e.stderr, e.n_samples)
    }

    fn moment(mut self, p: usize, q: usize, points: Vec<f64>) -> Self {
        self.p = Some(p);
        self.q = Some(q);
        self.points = Some(points);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<Row>,
    /// Running estimates after each ensemble batch.
    pub progress: Vec<Row>,
    pub wall_clock_s: f64,
}

#[derive(Debug)]
pub enum RunError {
    Validation(Vec<String>),
    Numerical(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(errs) => write!(f, "invalid configuration:\n  {}", errs.join("\n  ")),
            Self::Numerical(e) => write!(f, "numerical guard tripped: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::StepTooLarge { .. }
            | Error::Overflow { .. }
            | Error::Divergence { .. }
            | Error::UnderResolved(_)
            | Error::OptimumOnBoundary(_) => Self::Numerical(e),
            other => Self::Validation(vec![other.to_string()]),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Runs the configured experiment. The config is validated first.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultRecord, RunError> {
    let errs = cfg.validate("");
    if !errs.is_empty() {
        return Err(RunError::Validation(errs.iter().map(|e| e.to_string()).collect()));
    }
    let start = Instant::now();
    let (rows, progress) = match cfg.experiment.kind {
        ExperimentKind::Simulate => (simulate(cfg)?, Vec::new()),
        ExperimentKind::Moments => moments(cfg)?,
        ExperimentKind::Gaussianity => (gaussianity(cfg)?, Vec::new()),
        ExperimentKind::MemoryTilt => (memory_tilt(cfg)?, Vec::new()),
        ExperimentKind::MemoryChroma => (memory_chroma(cfg)?, Vec::new()),
        ExperimentKind::JumpCheck => (jump_check(cfg)?, Vec::new()),
        ExperimentKind::Validate => (validate_medium(cfg)?, Vec::new()),
    };
    Ok(ResultRecord {
        experiment: cfg.experiment.kind.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.ensemble.seed,
        rows,
        progress,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Index of the grid point at the origin (the centre of the cell).
fn origin_index(cfg: &ExperimentConfig) -> usize {
    let n = cfg.grid.n;
    if cfg.regime.dim == 1 {
        n / 2
    } else {
        (n / 2) * n + n / 2
    }
}

fn propagated_ensemble<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>, RunError>
where
    T: Send,
    F: Fn(&Simulator, WaveField) -> speckle_core::Result<T> + Sync,
{
    let regime = cfg.regime()?;
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let sim = Simulator::new(&regime, &model, &grid, cfg.solver.dz)?;
    let source = init_source(&regime, &grid, &cfg.source_spec())?;
    Ok(run_ensemble(cfg.ensemble.n_realizations, cfg.ensemble.seed, |_, rng| {
        let field = sim.propagate(&source, regime.z0, rng)?;
        f(&sim, field)
    })?)
}

fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let n = cfg.grid.n;
    let row0 = if cfg.regime.dim == 1 { 0 } else { (n / 2) * n };
    let samples = propagated_ensemble(cfg, |_, f| Ok((f.energy(), f.values[row0..row0 + n].to_vec())))?;
    let axis = cfg.grid()?.axis();
    let mut rows: Vec<Row> = samples.iter().enumerate().map(|(i, (e, _))| Row::real("energy", i as f64, *e)).collect();
    for (j, x) in axis.iter().enumerate() {
        let intensity: Vec<Complex64> = samples.iter().map(|(_, v)| Complex64::new(v[j].norm_sqr(), 0.0)).collect();
        rows.push(Row::estimate("intensity", *x, &estimate_mean(&intensity)?));
    }
    for (j, x) in axis.iter().enumerate() {
        let field: Vec<Complex64> = samples.iter().map(|(_, v)| v[j]).collect();
        rows.push(Row::estimate("mean_field", *x, &estimate_mean(&field)?));
    }
    Ok(rows)
}

/// Shift along the first axis by `s`.
fn axis_shift(dim: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = s;
    v
}

fn moments(cfg: &ExperimentConfig) -> Result<(Vec<Row>, Vec<Row>), RunError> {
    let regime = cfg.regime()?;
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let taus = cfg.experiment.tau.clone();
    let dim = cfg.regime.dim;
    let plane = cfg.source.profile == Profile::PlaneWave;
    let origin = origin_index(cfg);
    let eta = regime.eta;
    // per realization: two-point products per τ, then the field at the origin
    let samples = propagated_ensemble(cfg, |sim, f| {
        let mut out = Vec::with_capacity(taus.len() + 1);
        for &t in &taus {
            let s = eta * t;
            if plane {
                let back = spectral_shift(&f.values, &grid, sim.spectral(), &axis_shift(dim, s));
                let sum: Complex64 = f.values.iter().zip(&back).map(|(a, b)| a * b.conj()).sum();
                out.push(sum / grid.len() as f64);
            } else {
                let a = spectral_shift(&f.values, &grid, sim.spectral(), &axis_shift(dim, -s / 2.0));
                let b = spectral_shift(&f.values, &grid, sim.spectral(), &axis_shift(dim, s / 2.0));
                out.push(a[origin] * b[origin].conj());
            }
        }
        out.push(if plane { f.values.iter().sum::<Complex64>() / grid.len() as f64 } else { f.values[origin] });
        Ok(out)
    })?;
    let mut rows = Vec::new();
    let mut progress = Vec::new();
    let quad = ZetaQuadrature::default();
    let profile = cfg.source_profile();
    let zero = vec![0.0; dim];
    for (k, &t) in taus.iter().enumerate() {
        let column: Vec<Complex64> = samples.iter().map(|s| s[k]).collect();
        let est = estimate_mean(&column)?;
        let tau = axis_shift(dim, t);
        let exact = m11_omega0_explicit(regime.z0, &zero, &tau, &zero, &profile, &model, &regime, quad)?;
        rows.push(Row::estimate("m11_mc", t, &est).moment(1, 1, vec![eta * t / 2.0, -eta * t / 2.0]));
        rows.push(Row::complex("m11_exact", t, exact, 0.0, 0));
        let batch = cfg.ensemble.batch;
        for end in (batch..=column.len()).step_by(batch) {
            if end >= 2 {
                progress.push(Row::estimate("m11_mc_running", t, &estimate_mean(&column[..end])?).moment(1, 1, vec![
                    eta * t / 2.0,
                    -eta * t / 2.0,
                ]));
            }
        }
    }
    // damping is measured against the noise-free field at the same point
    let source = init_source(&regime, &grid, &cfg.source_spec())?;
    let sim = Simulator::new(&regime, &model, &grid, cfg.solver.dz)?;
    let free = sim.free_propagate(&source, regime.z0)?;
    let free_value = if plane { free.values.iter().sum::<Complex64>() / grid.len() as f64 } else { free.values[origin] };
    let first: Vec<Complex64> = samples.iter().map(|s| s[taus.len()]).collect();
    let damping = regime.omega0 * regime.omega0 * model.r0() * regime.z0 / (8.0 * eta * eta);
    let check = first_moment_check(&first, free_value, damping)?;
    rows.push(Row::estimate("first_moment", 0.0, &check.mean).moment(1, 0, vec![0.0]));
    rows.push(Row::complex("first_moment_ratio", 0.0, Complex64::new(check.ratio, 0.0), check.ratio_stderr, first.len()));
    rows.push(Row::real("first_moment_expected_ratio", 0.0, check.expected_ratio));
    Ok((rows, progress))
}

fn gaussianity(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let grid = cfg.grid()?;
    let dim = cfg.regime.dim;
    let eta = cfg.regime.eta;
    let origin = origin_index(cfg);
    let (t1, t2) = (cfg.experiment.tau[0], cfg.experiment.tau[1]);
    let rows_in = propagated_ensemble(cfg, |sim, f| {
        let a = spectral_shift(&f.values, &grid, sim.spectral(), &axis_shift(dim, -eta * t1));
        let b = spectral_shift(&f.values, &grid, sim.spectral(), &axis_shift(dim, -eta * t2));
        Ok(gaussianity_row(&[(a[origin], b[origin])]))
    })?;
    let rep = gaussianity_report(&rows_in)?;
    let points = vec![eta * t1, eta * t2];
    let mut rows: Vec<Row> = rep.z_scores().iter().enumerate().map(|(i, (_, z))| Row::real("z_score", i as f64, *z)).collect();
    rows.push(Row::estimate("mu22", 0.0, &rep.mu22).moment(2, 2, points.clone()));
    rows.push(Row::complex("mu22_prediction", 0.0, rep.prediction, 0.0, rep.n_realizations));
    rows.push(Row::estimate("mu22_deviation", 0.0, &rep.deviation).moment(2, 2, points.clone()));
    rows.push(Row::estimate("mu21", 0.0, &rep.mu21).moment(2, 1, points.clone()));
    rows.push(Row::estimate("mu20", 0.0, &rep.mu20).moment(2, 0, points));
    rows.push(Row::estimate("contrast", 0.0, &rep.contrast[0]));
    rows.push(Row::estimate("contrast", 1.0, &rep.contrast[1]));
    // mean intensities feed the contrast; report them too
    let i1 = jackknife(&rows_in, |m| m[1])?;
    rows.push(Row::estimate("intensity", 0.0, &i1));
    Ok(rows)
}

fn memory_tilt(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let model = cfg.model()?;
    let regime = cfg.regime()?;
    let dim = cfg.regime.dim;
    let scan = TiltScan {
        tau: axis_shift(dim, cfg.experiment.tilt_tau),
        z: regime.z0,
        omega0: regime.omega0,
        sigma2: model.sigma2(),
        source_width: cfg.source.width,
    };
    let opt = tilt_optimum(&scan)?;
    let half = if opt.analytic == 0.0 { 1.0 } else { 2.0 * opt.analytic.abs() };
    let mut rows: Vec<Row> = symmetric_grid(half, 41)
        .iter()
        .map(|&k| {
            let v = tilt_correlation(&scan, &axis_shift(dim, k), &axis_shift(dim, k));
            Row::real("C_abs", k, v.abs())
        })
        .collect();
    rows.push(Row::real("dkappa_opt_grid", opt.grid.0, opt.value));
    rows.push(Row::real("dkappa_opt_refined", opt.refined.0, opt.value));
    rows.push(Row::real("dkappa_opt_analytic", opt.analytic, opt.value));
    let widths = tilt_width_ratio(&scan)?;
    rows.push(Row::real("fwhm_ratio", 0.0, widths.ratio));
    if cfg.experiment.tilt_mc {
        let grid = cfg.grid()?;
        let sim = Simulator::new(&regime, &model, &grid, cfg.solver.dz)?;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> =
            symmetric_grid(half, 5).iter().map(|&k| (axis_shift(dim, k), axis_shift(dim, k))).collect();
        for p in tilt_mc_scan(&sim, &scan, &pairs, cfg.ensemble.n_realizations, cfg.ensemble.seed)? {
            rows.push(Row::complex("C_mc_abs", p.dkappa[0], Complex64::new(p.estimate.value.norm(), 0.0), p.estimate.stderr, p.estimate.n_samples));
        }
    }
    Ok(rows)
}

fn memory_chroma(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let model = cfg.model()?;
    let scan = ChromaScan {
        omega: cfg.experiment.omega_offset,
        h_grid: symmetric_grid(cfg.experiment.h_span, cfg.experiment.h_points),
        z0: cfg.regime.z0,
        omega0: cfg.regime.omega0,
        sigma2: model.sigma2(),
        dim: cfg.regime.dim,
    };
    let mut rows: Vec<Row> = chroma_profile(&scan).iter().map(|&(h, v)| Row::real("m11_abs", h, v)).collect();
    let h = h_opt(&scan);
    rows.push(Row::real("h_opt", h, scan.magnitude(h)));
    let arg = chroma_argmax(&scan)?;
    rows.push(Row::real("h_argmax", arg.refined, scan.magnitude(arg.refined)));
    let imp = chroma_improvement(&scan);
    rows.push(Row::real("improvement_ratio", h, imp.ratio));
    rows.push(Row::real("improvement_display", h, imp.display_factor));
    rows.push(Row::real("improvement_stated", h, imp.stated_factor));
    Ok(rows)
}

fn jump_check(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let model = cfg.model()?;
    let mut rows = Vec::new();
    for &eta in &cfg.experiment.jump_etas {
        let params = JumpProcessParams::new(eta, cfg.regime.omega0, &model)?;
        let rep = brownian_limit_check(&params, cfg.experiment.jump_z, cfg.experiment.jump_paths, cfg.ensemble.seed)?;
        rows.push(Row::estimate("mean_jumps", eta, &rep.mean_jumps));
        rows.push(Row::real("mean_jumps_expected", eta, rep.expected_jumps));
        let c = &rep.components[0];
        rows.push(Row::estimate("variance", eta, &c.variance));
        rows.push(Row::real("variance_expected", eta, c.expected_variance));
        rows.push(Row::estimate("fourth_cumulant", eta, &c.fourth_cumulant));
        rows.push(Row::real("fourth_cumulant_expected", eta, c.expected_fourth_cumulant));
        rows.push(Row::estimate("excess_kurtosis", eta, &c.excess_kurtosis));
        rows.push(Row::real("excess_kurtosis_expected", eta, c.expected_excess_kurtosis));
    }
    Ok(rows)
}

fn validate_medium(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let model = cfg.model()?;
    let report = validate(&model);
    let mut rows: Vec<Row> = report
        .checks
        .iter()
        .enumerate()
        .map(|(i, c)| Row::real(c.name, i as f64, if c.passed { 1.0 } else { 0.0 }))
        .collect();
    let regime = cfg.regime()?;
    let grid = cfg.grid()?;
    rows.push(Row::real("dz_max", 0.0, dz_max(&regime, &model, &grid, regime.omega0)));
    rows.push(Row::real("optical_depth", 0.0, regime.optical_depth()));
    Ok(rows)
}
