use nalgebra::DMatrix;

use super::state::{TrackState, IDX_PSI, KINEMATIC_DIM};
use crate::error::{Error, Result};
use crate::gp_model::{BasisProjector, GpHyperParams, InputGrid};
use crate::linalg::{symmetrize, wrap_pi};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoiseConfig {
    /// White-acceleration intensity of the constant-velocity model.
    pub sigma_q: f64,
    /// Random-walk intensity of the orientation, rad/√s.
    pub sigma_q_psi: f64,
}

impl ProcessNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_q >= 0.0 && self.sigma_q.is_finite()) {
            return Err(Error::invalid("sigma_q must be finite and non-negative"));
        }
        if !(self.sigma_q_psi >= 0.0 && self.sigma_q_psi.is_finite()) {
            return Err(Error::invalid("sigma_q_psi must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Block-diagonal transition `F` and process noise `Q` over `dt` seconds.
///
/// Kinematics follow a constant-velocity model driven by white acceleration,
/// orientation is a random walk, and the extent decays toward its prior with
/// `λ = exp(−α·dt)` and noise `(1−λ²)·K_bb`.
pub fn make_process_model(
    dt: f64,
    pn: &ProcessNoiseConfig,
    hp: &GpHyperParams,
    basis: &InputGrid,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("time step must be positive"));
    }
    pn.validate()?;
    let projector = BasisProjector::new(basis, hp)?;
    let n = basis.len();
    let dim = KINEMATIC_DIM + n;
    let lambda = libm::exp(-hp.alpha * dt);

    let mut f = DMatrix::identity(dim, dim);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    for i in KINEMATIC_DIM..dim {
        f[(i, i)] = lambda;
    }

    let mut q = DMatrix::zeros(dim, dim);
    let q2 = pn.sigma_q * pn.sigma_q;
    let (pp, pv, vv) = (q2 * dt * dt * dt / 3.0, q2 * dt * dt / 2.0, q2 * dt);
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        q[(p, p)] = pp;
        q[(p, v)] = pv;
        q[(v, p)] = pv;
        q[(v, v)] = vv;
    }
    q[(IDX_PSI, IDX_PSI)] = pn.sigma_q_psi * pn.sigma_q_psi * dt;
    let extent_noise = projector.basis_covariance() * (1.0 - lambda * lambda);
    q.view_mut((KINEMATIC_DIM, KINEMATIC_DIM), (n, n))
        .copy_from(&extent_noise);
    Ok((f, q))
}

/// Time update with an explicit model. The extent mean relaxes toward the
/// prior mean as an affine offset on top of `F`.
pub fn predict_with_model(
    state: &TrackState,
    dt: f64,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> TrackState {
    let mu = state.hp.prior_mean;
    let mut mean = f * &state.mean;
    for i in KINEMATIC_DIM..state.dim() {
        // F carries λ on the extent diagonal; add back (1-λ)·μ
        mean[i] += (1.0 - f[(i, i)]) * mu;
    }
    mean[IDX_PSI] = wrap_pi(mean[IDX_PSI]);
    let mut cov = f * &state.cov * f.transpose() + q;
    symmetrize(&mut cov);
    TrackState {
        mean,
        cov,
        basis: state.basis.clone(),
        hp: state.hp,
        time: state.time + dt,
    }
}

/// EKF time update over `dt` seconds.
pub fn ekf_predict(state: &TrackState, dt: f64, pn: &ProcessNoiseConfig) -> Result<TrackState> {
    let (f, q) = make_process_model(dt, pn, &state.hp, &state.basis)?;
    Ok(predict_with_model(state, dt, &f, &q))
}
