use num_complex::Complex64;
use speckle_core::rng::{realization_rng, run_ensemble};
use speckle_core::simulator::ScreenSampler;
use speckle_core::statistics::estimate_mean;
use speckle_core::{init_source, Covariance, GaussianCovariance, Grid, ScalingRegime, Simulator, SourceSpec};

fn setup() -> (ScalingRegime, Grid, GaussianCovariance) {
    let regime = ScalingRegime::new(0.01, 0.25, 1.0, vec![0.0], 1.0, 1).unwrap();
    let grid = Grid::new(64, 16.0, 1).unwrap();
    let model = GaussianCovariance::new(1.0, 1.0, 1).unwrap();
    (regime, grid, model)
}

#[test]
fn screen_covariance_matches_model() {
    let (_, _, model) = setup();
    let grid = Grid::new(128, 32.0, 1).unwrap();
    let sampler = ScreenSampler::new(&model, &grid).unwrap();
    let dz = 0.01;
    let n = grid.n();
    let mut rng = realization_rng(11, 0);
    let draws = 4000;
    let lags = [0usize, 2, 4, 8];
    let mut acc = [0.0f64; 4];
    for _ in 0..draws {
        let s = sampler.sample(dz, &mut rng);
        for (k, &l) in lags.iter().enumerate() {
            acc[k] += (0..n).map(|x| s.values[x] * s.values[(x + l) % n]).sum::<f64>() / n as f64;
        }
    }
    for (k, &l) in lags.iter().enumerate() {
        let got = acc[k] / draws as f64 / dz;
        let want = model.eval_r(&[l as f64 * grid.spacing()]);
        assert!((got - want).abs() < 0.05, "lag {l}: {got} vs {want}");
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let (regime, grid, model) = setup();
    let sim = Simulator::new(&regime, &model, &grid, 5e-4).unwrap();
    let source = init_source(&regime, &grid, &SourceSpec::gaussian(2.0, 1)).unwrap();
    let go = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(6, 42, |_, rng| Ok(sim.propagate(&source, 0.5, rng)?.values)).unwrap())
    };
    let one = go(1);
    let three = go(3);
    assert_eq!(one, three);
    assert_ne!(one[0], one[1]);
}

#[test]
fn first_moment_damps_with_depth() {
    let (regime, grid, model) = setup();
    let sim = Simulator::new(&regime, &model, &grid, 5e-4).unwrap();
    let source = init_source(&regime, &grid, &SourceSpec::plane_wave(1)).unwrap();
    let z = 0.25;
    let means = run_ensemble(400, 5, |_, rng| {
        let f = sim.propagate(&source, z, rng)?;
        Ok(f.values.iter().sum::<Complex64>() / grid.len() as f64)
    })
    .unwrap();
    let est = estimate_mean(&means).unwrap();
    let expected = (-model.r0() * z / (8.0 * regime.eta * regime.eta)).exp();
    assert!(est.within(Complex64::new(expected, 0.0), 4.0), "{:?} vs {expected}", est);
}

#[test]
fn plane_wave_intensity_is_one_on_average() {
    let (regime, grid, model) = setup();
    let sim = Simulator::new(&regime, &model, &grid, 5e-4).unwrap();
    let source = init_source(&regime, &grid, &SourceSpec::plane_wave(1)).unwrap();
    let fields = run_ensemble(8, 9, |_, rng| sim.propagate(&source, 0.5, rng)).unwrap();
    for f in fields {
        let mean_intensity = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.len() as f64;
        assert!((mean_intensity - 1.0).abs() < 1e-10);
    }
}
