//! One-dimensional regression demo comparing recursive GP regression with
//! batch GP regression on a static latent function.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp_model::{gp_regress, GaussianBelief, GpHyperParams, InputGrid, KernelKind};
use crate::rgp::{rgp_init, rgp_predict_at, rgp_step, ScalarMeasurement};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub domain: (f64, f64),
    pub n_measurements: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub hp: GpHyperParams,
    /// Number of points in the evaluation grid.
    pub query_points: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            domain: (0.0, 10.0),
            n_measurements: 30,
            noise_std: 0.2,
            seed: 7,
            hp: GpHyperParams {
                sigma_f: 1.0,
                length_scale: 1.0,
                sigma_r: 0.2,
                alpha: 0.0,
                prior_mean: 0.0,
            },
            query_points: 200,
        }
    }
}

/// The static function sampled by the demo.
pub fn latent_function(x: f64) -> f64 {
    libm::sin(x) + 0.4 * libm::cos(2.1 * x)
}

fn noisy_values(inputs: &[f64], cfg: &DemoConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ScalarMeasurement>> {
    let noise = Normal::new(0.0, cfg.noise_std)
        .map_err(|_| Error::invalid("noise_std must be finite and non-negative"))?;
    inputs
        .iter()
        .enumerate()
        .map(|(k, &x)| ScalarMeasurement::new(x, latent_function(x) + noise.sample(rng), k as f64))
        .collect()
}

/// Measurements at inputs drawn uniformly over the domain.
pub fn demo_measurements(cfg: &DemoConfig) -> Result<Vec<ScalarMeasurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.domain;
    let inputs: Vec<f64> = (0..cfg.n_measurements)
        .map(|_| rng.random_range(lo..hi))
        .collect();
    noisy_values(&inputs, cfg, &mut rng)
}

/// Measurements taken repeatedly at `distinct` random inputs, in shuffled
/// order. Returns the sorted distinct inputs as a grid alongside them.
pub fn repeated_input_measurements(
    cfg: &DemoConfig,
    distinct: usize,
) -> Result<(InputGrid, Vec<ScalarMeasurement>)> {
    if distinct == 0 {
        return Err(Error::invalid("need at least one distinct input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.domain;
    let mut sites: Vec<f64> = (0..distinct).map(|_| rng.random_range(lo..hi)).collect();
    sites.sort_by(f64::total_cmp);
    let grid = InputGrid::new(KernelKind::ScalarLine, sites.clone())?;
    let mut inputs: Vec<f64> = (0..cfg.n_measurements)
        .map(|k| sites[k % distinct])
        .collect();
    inputs.shuffle(&mut rng);
    Ok((grid, noisy_values(&inputs, cfg, &mut rng)?))
}

/// Recursive and batch beliefs at the query grid after one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoStep {
    /// Number of measurements absorbed so far.
    pub step: usize,
    pub recursive: GaussianBelief,
    pub batch: GaussianBelief,
}

/// Feeds `measurements` one at a time to a recursive GP on `basis`, recording
/// the recursive and batch posteriors at `query` after every step.
pub fn run_comparison(
    measurements: &[ScalarMeasurement],
    basis: &InputGrid,
    hp: &GpHyperParams,
    query: &[f64],
) -> Result<Vec<DemoStep>> {
    let mut state = rgp_init(basis, hp)?;
    let mut steps = Vec::with_capacity(measurements.len());
    let mut xs = Vec::with_capacity(measurements.len());
    let mut ys = Vec::with_capacity(measurements.len());
    for (k, m) in measurements.iter().enumerate() {
        state = rgp_step(&state, m)?;
        xs.push(m.input);
        ys.push(m.value);
        steps.push(DemoStep {
            step: k + 1,
            recursive: rgp_predict_at(&state, query)?,
            batch: gp_regress(&xs, &ys, query, hp, basis.kind())?,
        });
    }
    Ok(steps)
}

/// Largest absolute difference between two belief means.
pub fn max_mean_deviation(a: &GaussianBelief, b: &GaussianBelief) -> f64 {
    (&a.mean - &b.mean).amax()
}

/// Evaluation grid spanning the demo domain.
pub fn query_grid(cfg: &DemoConfig) -> Result<InputGrid> {
    InputGrid::linspace(cfg.domain.0, cfg.domain.1, cfg.query_points)
}

/// Uniform basis of `n` points over the demo domain.
pub fn uniform_basis(cfg: &DemoConfig, n: usize) -> Result<InputGrid> {
    InputGrid::linspace(cfg.domain.0, cfg.domain.1, n)
}
