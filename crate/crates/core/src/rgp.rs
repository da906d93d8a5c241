//! Recursive GP regression: a Kalman filter whose state is the vector of
//! latent function values at a fixed set of basis points.
//!
//! Each measurement is linked to the state through the conditional
//! projection `H = K_xb·K_bb⁻¹`, with the part of the prior left unexplained
//! by the basis added to the measurement noise. When every measurement input
//! is a basis point the recursion reproduces batch GP regression exactly.

use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp_model::{BasisProjector, GaussianBelief, GpHyperParams, InputGrid};
use crate::linalg::symmetrize;

/// A scalar observation of the latent function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMeasurement {
    pub input: f64,
    pub value: f64,
    pub time: f64,
}

impl ScalarMeasurement {
    pub fn new(input: f64, value: f64, time: f64) -> Result<Self> {
        if !(input.is_finite() && value.is_finite() && time.is_finite()) {
            return Err(Error::invalid("measurement fields must be finite"));
        }
        Ok(ScalarMeasurement { input, value, time })
    }
}

#[derive(Debug, Clone)]
pub struct RgpState {
    pub basis: InputGrid,
    pub belief: GaussianBelief,
    pub hp: GpHyperParams,
    pub time: f64,
    projector: BasisProjector,
}

impl RgpState {
    pub fn projector(&self) -> &BasisProjector {
        &self.projector
    }
}

/// Prior state: constant prior mean and covariance `K_bb`.
pub fn rgp_init(basis: &InputGrid, hp: &GpHyperParams) -> Result<RgpState> {
    let projector = BasisProjector::new(basis, hp)?;
    let belief = GaussianBelief {
        mean: DVector::from_element(basis.len(), hp.prior_mean),
        cov: projector.basis_covariance().clone(),
    };
    Ok(RgpState {
        basis: basis.clone(),
        belief,
        hp: *hp,
        time: 0.0,
        projector,
    })
}

/// Mean-reverting forgetting step over `dt` seconds.
///
/// With `λ = exp(−α·dt)` the mean relaxes toward the prior mean by `λ` and
/// the covariance toward `K_bb` by `λ²`, so the GP prior is stationary.
pub fn rgp_time_update(state: &RgpState, dt: f64) -> Result<RgpState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("time step must be non-negative"));
    }
    let mut next = state.clone();
    next.time = state.time + dt;
    if state.hp.alpha == 0.0 || dt == 0.0 {
        return Ok(next);
    }
    let lambda = libm::exp(-state.hp.alpha * dt);
    let mu = state.hp.prior_mean;
    next.belief.mean = state.belief.mean.map(|m| mu + lambda * (m - mu));
    next.belief.cov = &state.belief.cov * (lambda * lambda)
        + state.projector.basis_covariance() * (1.0 - lambda * lambda);
    symmetrize(&mut next.belief.cov);
    Ok(next)
}

/// Scalar Kalman update with one measurement, in Joseph form.
pub fn rgp_measurement_update(state: &RgpState, m: &ScalarMeasurement) -> Result<RgpState> {
    if m.time < state.time {
        return Err(Error::invalid(format!(
            "measurement time {} precedes state time {}",
            m.time, state.time
        )));
    }
    let proj = state.projector.project(&[m.input])?;
    let h = proj.h.row(0).clone_owned();
    let noise = state.hp.noise_variance() + proj.r_extra[(0, 0)].max(0.0);

    let p = &state.belief.cov;
    let p_ht = p * h.transpose();
    let innovation_var = (&h * &p_ht)[0] + noise;
    if !(innovation_var > 0.0) || !innovation_var.is_finite() {
        return Err(Error::numerical(format!(
            "innovation variance {innovation_var} is not positive"
        )));
    }
    let mu = state.hp.prior_mean;
    let predicted = mu + (&h * state.belief.mean.add_scalar(-mu))[0];
    let gain = &p_ht / innovation_var;

    let n = state.basis.len();
    let i_kh = DMatrix::identity(n, n) - &gain * &h;
    let mut cov = &i_kh * p * i_kh.transpose() + &gain * gain.transpose() * noise;
    symmetrize(&mut cov);

    let mut next = state.clone();
    next.belief.mean = &state.belief.mean + &gain * (m.value - predicted);
    next.belief.cov = cov;
    next.time = m.time;
    Ok(next)
}

/// Advances to the measurement time and applies it.
pub fn rgp_step(state: &RgpState, m: &ScalarMeasurement) -> Result<RgpState> {
    let dt = m.time - state.time;
    let advanced = rgp_time_update(state, dt)?;
    rgp_measurement_update(&advanced, m)
}

/// Predictive belief at arbitrary inputs.
pub fn rgp_predict_at(state: &RgpState, query: &[f64]) -> Result<GaussianBelief> {
    if query.is_empty() {
        return Err(Error::invalid("query must be non-empty"));
    }
    let proj = state.projector.project(query)?;
    let mu = state.hp.prior_mean;
    let mean = (&proj.h * state.belief.mean.add_scalar(-mu)).add_scalar(mu);
    let mut cov = &proj.h * &state.belief.cov * proj.h.transpose() + proj.r_extra;
    symmetrize(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_model::{gp_regress, KernelKind};
    use crate::linalg::min_eigenvalue;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn line_hp(alpha: f64, mu: f64) -> GpHyperParams {
        GpHyperParams::new(2.0, 1.0, 0.3, alpha, mu).unwrap()
    }

    #[test]
    fn init_single_point() {
        let basis = InputGrid::new(KernelKind::ScalarLine, vec![0.0]).unwrap();
        let s = rgp_init(&basis, &line_hp(0.0, 0.0)).unwrap();
        assert_eq!(s.belief.mean[0], 0.0);
        assert_eq!(s.belief.cov[(0, 0)], 4.0);
    }

    #[test]
    fn init_diagonal_and_decorrelation() {
        let basis = InputGrid::linspace(0.0, 100.0, 6).unwrap();
        let s = rgp_init(&basis, &line_hp(0.0, 1.0)).unwrap();
        for i in 0..6 {
            assert_eq!(s.belief.cov[(i, i)], 4.0);
            for j in 0..6 {
                if i != j {
                    assert!(s.belief.cov[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn time_update_without_forgetting_is_identity() {
        let basis = InputGrid::linspace(0.0, 3.0, 4).unwrap();
        let s = rgp_init(&basis, &line_hp(0.0, 0.5)).unwrap();
        let m = ScalarMeasurement::new(1.0, 2.0, 0.0).unwrap();
        let s = rgp_measurement_update(&s, &m).unwrap();
        let t = rgp_time_update(&s, 7.0).unwrap();
        assert_eq!(t.belief, s.belief);
        assert_eq!(t.time, 7.0);
    }

    #[test]
    fn long_time_update_returns_to_prior() {
        let basis = InputGrid::linspace(0.0, 3.0, 4).unwrap();
        let prior = rgp_init(&basis, &line_hp(0.5, 0.5)).unwrap();
        let m = ScalarMeasurement::new(1.3, 2.0, 0.0).unwrap();
        let s = rgp_measurement_update(&prior, &m).unwrap();
        let t = rgp_time_update(&s, 1e4).unwrap();
        assert!((&t.belief.mean - &prior.belief.mean).amax() < 1e-12);
        assert!((&t.belief.cov - &prior.belief.cov).amax() < 1e-12);
    }

    #[test]
    fn prior_is_stationary_under_forgetting() {
        let basis = InputGrid::uniform_angles(8).unwrap();
        let hp = GpHyperParams::new(2.0, 0.5, 0.8, 0.3, 1.0).unwrap();
        let prior = rgp_init(&basis, &hp).unwrap();
        let t = rgp_time_update(&prior, 2.5).unwrap();
        assert!((&t.belief.mean - &prior.belief.mean).amax() < 1e-14);
        assert!((&t.belief.cov - &prior.belief.cov).amax() < 1e-14);
    }

    #[test]
    fn negative_dt_rejected() {
        let basis = InputGrid::uniform_angles(4).unwrap();
        let s = rgp_init(&basis, &line_hp(0.1, 0.0)).unwrap();
        assert!(rgp_time_update(&s, -1.0).is_err());
        let stale = ScalarMeasurement::new(0.0, 1.0, -1.0).unwrap();
        assert!(rgp_measurement_update(&s, &stale).is_err());
    }

    #[test]
    fn update_at_sole_basis_point() {
        let mu = 0.4;
        let hp = line_hp(0.0, mu);
        let basis = InputGrid::new(KernelKind::ScalarLine, vec![2.0]).unwrap();
        let s = rgp_init(&basis, &hp).unwrap();
        let m = ScalarMeasurement::new(2.0, 3.0, 0.0).unwrap();
        let post = rgp_measurement_update(&s, &m).unwrap();
        let expected = mu + 4.0 * (3.0 - mu) / (4.0 + 0.09);
        assert!((post.belief.mean[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn huge_noise_leaves_state_unchanged() {
        let hp = GpHyperParams::new(2.0, 1.0, 1e9, 0.0, 0.0).unwrap();
        let basis = InputGrid::linspace(0.0, 2.0, 3).unwrap();
        let s = rgp_init(&basis, &hp).unwrap();
        let m = ScalarMeasurement::new(0.7, 5.0, 0.0).unwrap();
        let post = rgp_measurement_update(&s, &m).unwrap();
        assert!((&post.belief.mean - &s.belief.mean).amax() < 1e-12);
        assert!((&post.belief.cov - &s.belief.cov).amax() < 1e-12);
    }

    #[test]
    fn fresh_prediction_is_prior() {
        let hp = line_hp(0.0, 0.9);
        let basis = InputGrid::linspace(0.0, 2.0, 5).unwrap();
        let s = rgp_init(&basis, &hp).unwrap();
        let pred = rgp_predict_at(&s, &[0.25, 1.0, 7.0]).unwrap();
        for i in 0..3 {
            assert!((pred.mean[i] - 0.9).abs() < 1e-12);
            assert!((pred.cov[(i, i)] - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_at_basis_is_basis_marginal() {
        let hp = line_hp(0.0, 0.0);
        let basis = InputGrid::linspace(0.0, 2.0, 5).unwrap();
        let mut s = rgp_init(&basis, &hp).unwrap();
        for (i, x) in [0.1, 0.8, 1.9].iter().enumerate() {
            let m = ScalarMeasurement::new(*x, libm::sin(*x), i as f64).unwrap();
            s = rgp_step(&s, &m).unwrap();
        }
        let pred = rgp_predict_at(&s, &[basis.points()[2]]).unwrap();
        assert_eq!(pred.mean[0], s.belief.mean[2]);
        assert_eq!(pred.cov[(0, 0)], s.belief.cov[(2, 2)]);
    }

    fn subset_case(order: &[usize]) -> (RgpState, GaussianBelief) {
        let hp = GpHyperParams::new(1.0, 0.8, 0.2, 0.0, 0.1).unwrap();
        let basis = InputGrid::new(KernelKind::ScalarLine, vec![0.0, 0.7, 1.9, 2.6, 4.0]).unwrap();
        let inputs: Vec<f64> = (0..10).map(|i| basis.points()[i % 5]).collect();
        let values: Vec<f64> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| libm::cos(*x) + 0.05 * i as f64)
            .collect();
        let mut s = rgp_init(&basis, &hp).unwrap();
        for &i in order {
            let m = ScalarMeasurement::new(inputs[i], values[i], 0.0).unwrap();
            s = rgp_measurement_update(&s, &m).unwrap();
        }
        let oracle =
            gp_regress(&inputs, &values, basis.points(), &hp, KernelKind::ScalarLine).unwrap();
        (s, oracle)
    }

    #[test]
    fn subset_basis_matches_batch_regression() {
        let order: Vec<usize> = (0..10).collect();
        let (s, oracle) = subset_case(&order);
        assert!((&s.belief.mean - &oracle.mean).amax() < 1e-8);
        assert!((&s.belief.cov - &oracle.cov).amax() < 1e-8);
    }

    proptest! {
        #[test]
        fn subset_exactness_is_order_free(perm in Just((0..10).collect::<Vec<usize>>()).prop_shuffle()) {
            let (s, oracle) = subset_case(&perm);
            prop_assert!((&s.belief.mean - &oracle.mean).amax() < 1e-8);
            prop_assert!((&s.belief.cov - &oracle.cov).amax() < 1e-8);
        }

        #[test]
        fn covariance_stays_psd(
            xs in proptest::collection::vec(0.0f64..6.28, 1..40),
            dts in proptest::collection::vec(0.0f64..3.0, 40),
        ) {
            let hp = GpHyperParams::new(2.0, core::f64::consts::PI / 10.0, 0.8, 0.004, 1.0).unwrap();
            let basis = InputGrid::uniform_angles(20).unwrap();
            let mut s = rgp_init(&basis, &hp).unwrap();
            let mut t = 0.0;
            for (i, x) in xs.iter().enumerate() {
                t += dts[i];
                let m = ScalarMeasurement::new(*x, 1.0 + 0.3 * libm::cos(3.0 * x), t).unwrap();
                s = rgp_step(&s, &m).unwrap();
                prop_assert!(min_eigenvalue(&s.belief.cov) >= -1e-8 * 4.0);
            }
        }

        #[test]
        fn forgetting_trace_moves_monotonically_to_prior(dt in 0.01f64..2.0) {
            let hp = GpHyperParams::new(2.0, 0.6, 0.3, 0.2, 1.0).unwrap();
            let basis = InputGrid::uniform_angles(10).unwrap();
            let mut s = rgp_init(&basis, &hp).unwrap();
            for (i, x) in [0.1, 1.0, 2.5, 4.0, 5.5].iter().enumerate() {
                let m = ScalarMeasurement::new(*x, 1.5, i as f64 * 0.1).unwrap();
                s = rgp_step(&s, &m).unwrap();
            }
            let target = s.projector().basis_covariance().trace();
            let mut gap = target - s.belief.cov.trace();
            prop_assert!(gap > 0.0);
            for _ in 0..20 {
                s = rgp_time_update(&s, dt).unwrap();
                prop_assert!(min_eigenvalue(&s.belief.cov) >= -1e-8 * 4.0);
                let next_gap = target - s.belief.cov.trace();
                prop_assert!(next_gap >= -1e-12 && next_gap <= gap + 1e-12);
                gap = next_gap;
            }
        }
    }
}
