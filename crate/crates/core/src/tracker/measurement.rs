//! Star-convex GP contour measurement model and the stacked scan update.
//!
//! A measurement `z` is associated with the contour point on the ray from the
//! tracked center `c` through `z`. With bearing `θ_G` and local angle
//! `θ_L = θ_G − ψ`, the predicted point is `h = c + u(θ_G)·r̂(θ_L)` where
//! `r̂(θ) = μ + H_f(θ)·(f − μ)` interpolates the basis radii. The Jacobian
//! accounts for the bearing moving with the center and the local angle
//! moving with the orientation.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::state::{Scan, TrackState, IDX_PSI, IDX_X, IDX_Y, KINEMATIC_DIM};
use crate::error::{Error, Result};
use crate::gp_model::BasisProjector;
use crate::linalg::{factor_spd, symmetrize, wrap_pi, wrap_two_pi};
use crate::Point;

/// Minimum center-to-measurement distance for a defined bearing.
const MIN_RANGE: f64 = 1e-9;

/// Linearization of one point measurement about the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLinearization {
    pub predicted: Vector2<f64>,
    /// 2 × state-dimension Jacobian of `predicted`.
    pub jacobian: DMatrix<f64>,
    pub noise: Matrix2<f64>,
}

/// Maps a state and one 2-D measurement to its prediction, Jacobian and noise.
pub trait PointMeasurementModel {
    fn linearize(&self, state: &TrackState, z: &Point) -> Result<PointLinearization>;
}

/// GP extent contour model; caches the basis factorization.
#[derive(Debug, Clone)]
pub struct ContourModel {
    projector: BasisProjector,
}

impl ContourModel {
    pub fn new(state: &TrackState) -> Result<Self> {
        Ok(ContourModel {
            projector: BasisProjector::new(&state.basis, &state.hp)?,
        })
    }

    pub fn projector(&self) -> &BasisProjector {
        &self.projector
    }
}

impl PointMeasurementModel for ContourModel {
    fn linearize(&self, state: &TrackState, z: &Point) -> Result<PointLinearization> {
        let cx = state.mean[IDX_X];
        let cy = state.mean[IDX_Y];
        let dx = z[0] - cx;
        let dy = z[1] - cy;
        let range_sq = dx * dx + dy * dy;
        if !(libm::sqrt(range_sq) > MIN_RANGE) {
            return Err(Error::DegenerateGeometry(format!(
                "measurement ({}, {}) coincides with the object center",
                z[0], z[1]
            )));
        }
        let bearing = libm::atan2(dy, dx);
        let local = wrap_two_pi(bearing - state.mean[IDX_PSI]);
        let point = self.projector.project_point(local)?;

        let mu = state.hp.prior_mean;
        let n = state.extent_dim();
        let extent = state.mean.rows(KINEMATIC_DIM, n);
        let mut radius = mu;
        let mut dradius = 0.0;
        for j in 0..n {
            let dev = extent[j] - mu;
            radius += point.h[j] * dev;
            dradius += point.dh[j] * dev;
        }

        let u = Vector2::new(libm::cos(bearing), libm::sin(bearing));
        let u_perp = Vector2::new(-u[1], u[0]);
        let predicted = Vector2::new(cx, cy) + u * radius;

        // ∂θ_G/∂c
        let dbearing = [dy / range_sq, -dx / range_sq];
        let along_bearing = u_perp * radius + u * dradius;

        let mut jacobian = DMatrix::zeros(2, state.dim());
        for row in 0..2 {
            jacobian[(row, IDX_X)] = along_bearing[row] * dbearing[0];
            jacobian[(row, IDX_Y)] = along_bearing[row] * dbearing[1];
            // ∂θ_L/∂ψ = −1
            jacobian[(row, IDX_PSI)] = -u[row] * dradius;
            for j in 0..n {
                jacobian[(row, KINEMATIC_DIM + j)] = u[row] * point.h[j];
            }
        }
        jacobian[(0, IDX_X)] += 1.0;
        jacobian[(1, IDX_Y)] += 1.0;

        let noise = Matrix2::identity() * state.hp.noise_variance()
            + u * u.transpose() * point.r_extra.max(0.0);
        Ok(PointLinearization {
            predicted,
            jacobian,
            noise,
        })
    }
}

/// Predicted contour point for `z` and the full analytic Jacobian.
pub fn measurement_model(state: &TrackState, z: &Point) -> Result<(Vector2<f64>, DMatrix<f64>)> {
    let lin = ContourModel::new(state)?.linearize(state, z)?;
    Ok((lin.predicted, lin.jacobian))
}

/// Joseph-form Kalman update of `(mean, cov)` with a stacked linearized
/// measurement. Returns the posterior mean and covariance.
pub fn kalman_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    innovation: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    noise: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let pjt = cov * jacobian.transpose();
    let mut s = jacobian * &pjt + noise;
    symmetrize(&mut s);
    let scale = (s.trace() / s.nrows() as f64).max(f64::MIN_POSITIVE);
    let chol = factor_spd(&s, scale, "innovation covariance")?;
    // Kᵀ = S⁻¹·(P·Jᵀ)ᵀ
    let gain = chol.solve(&pjt.transpose()).transpose();
    let posterior_mean = mean + &gain * innovation;

    let dim = mean.len();
    let i_kj = DMatrix::identity(dim, dim) - &gain * jacobian;
    let mut posterior_cov = &i_kj * cov * i_kj.transpose() + &gain * noise * gain.transpose();
    symmetrize(&mut posterior_cov);
    if posterior_mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite posterior mean"));
    }
    Ok((posterior_mean, posterior_cov))
}

/// Single stacked EKF update over every point of `scan` using `model`.
pub fn ekf_update_scan_with<M: PointMeasurementModel + ?Sized>(
    state: &TrackState,
    scan: &Scan,
    model: &M,
) -> Result<TrackState> {
    if scan.time < state.time {
        return Err(Error::invalid(format!(
            "scan time {} precedes state time {}",
            scan.time, state.time
        )));
    }
    let m = scan.points.len();
    let dim = state.dim();
    let lins: Vec<PointLinearization> = scan
        .points
        .iter()
        .map(|z| model.linearize(state, z))
        .collect::<Result<_>>()?;

    let mut innovation = DVector::zeros(2 * m);
    let mut jacobian = DMatrix::zeros(2 * m, dim);
    let mut noise = DMatrix::zeros(2 * m, 2 * m);
    for (i, (lin, z)) in lins.iter().zip(&scan.points).enumerate() {
        innovation[2 * i] = z[0] - lin.predicted[0];
        innovation[2 * i + 1] = z[1] - lin.predicted[1];
        jacobian.rows_mut(2 * i, 2).copy_from(&lin.jacobian);
        noise
            .view_mut((2 * i, 2 * i), (2, 2))
            .copy_from(&lin.noise);
    }
    let (mut mean, cov) = kalman_update(&state.mean, &state.cov, &innovation, &jacobian, &noise)?;
    mean[IDX_PSI] = wrap_pi(mean[IDX_PSI]);
    Ok(TrackState {
        mean,
        cov,
        basis: state.basis.clone(),
        hp: state.hp,
        time: scan.time,
    })
}

/// Stacked EKF update of `state` with the GP contour model.
pub fn ekf_update_scan(state: &TrackState, scan: &Scan) -> Result<TrackState> {
    let model = ContourModel::new(state)?;
    ekf_update_scan_with(state, scan, &model)
}

/// Extent radius at local angles, from the state's mean extent.
pub(crate) fn radii_at(
    projector: &BasisProjector,
    extent: &[f64],
    prior_mean: f64,
    angles: &[f64],
) -> Result<Vec<f64>> {
    let h = projector.interpolation_matrix(angles)?;
    let dev = DVector::from_iterator(extent.len(), extent.iter().map(|f| f - prior_mean));
    Ok((h * dev).iter().map(|d| prior_mean + d).collect())
}

/// Closed polygon of `vertices` points tracing the estimated contour at
/// uniform local angles, radii floored at zero.
pub fn contour_estimate(state: &TrackState, vertices: usize) -> Result<Vec<Point>> {
    let extent: Vec<f64> = state.extent().iter().copied().collect();
    let projector = BasisProjector::new(&state.basis, &state.hp)?;
    contour_from_extent(
        &projector,
        state.center(),
        state.psi(),
        &extent,
        vertices,
    )
}

/// Contour polygon from an extent vector expressed on `projector`'s basis.
pub fn contour_from_extent(
    projector: &BasisProjector,
    center: Point,
    psi: f64,
    extent: &[f64],
    vertices: usize,
) -> Result<Vec<Point>> {
    if vertices < 3 {
        return Err(Error::invalid("contour needs at least 3 vertices"));
    }
    if extent.len() != projector.basis().len() {
        return Err(Error::invalid("extent length does not match the basis"));
    }
    let angles: Vec<f64> = (0..vertices)
        .map(|i| core::f64::consts::TAU * i as f64 / vertices as f64)
        .collect();
    let radii = radii_at(projector, extent, projector.hyper_params().prior_mean, &angles)?;
    Ok(angles
        .iter()
        .zip(radii)
        .map(|(theta, r)| {
            let r = r.max(0.0);
            let a = psi + theta;
            [center[0] + r * libm::cos(a), center[1] + r * libm::sin(a)]
        })
        .collect())
}
