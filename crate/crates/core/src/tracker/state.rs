use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::gp_model::{BasisProjector, GpHyperParams, InputGrid, KernelKind};
use crate::Point;

pub const IDX_X: usize = 0;
pub const IDX_Y: usize = 1;
pub const IDX_VX: usize = 2;
pub const IDX_VY: usize = 3;
pub const IDX_PSI: usize = 4;
/// Number of kinematic entries ahead of the extent values in the state vector.
pub const KINEMATIC_DIM: usize = 5;

/// Joint Gaussian over `[x, y, ẋ, ẏ, ψ, f₁..f_N]`, where `f` holds the
/// extent radii at the basis angles of the object's local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub basis: InputGrid,
    pub hp: GpHyperParams,
    pub time: f64,
}

impl TrackState {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        basis: InputGrid,
        hp: GpHyperParams,
        time: f64,
    ) -> Result<Self> {
        if basis.kind() != KernelKind::AngleCircle {
            return Err(Error::invalid("track extent basis must be an angle grid"));
        }
        if basis.len() < 3 {
            return Err(Error::invalid("track extent basis needs at least 3 angles"));
        }
        let dim = KINEMATIC_DIM + basis.len();
        if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::invalid(format!(
                "state dimension mismatch: expected {dim}, got mean {} and cov {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) || !time.is_finite() {
            return Err(Error::invalid("state must be finite"));
        }
        hp.validate()?;
        let mut state = TrackState {
            mean,
            cov,
            basis,
            hp,
            time,
        };
        state.mean[IDX_PSI] = crate::linalg::wrap_pi(state.mean[IDX_PSI]);
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn extent_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn center(&self) -> Point {
        [self.mean[IDX_X], self.mean[IDX_Y]]
    }

    pub fn velocity(&self) -> Point {
        [self.mean[IDX_VX], self.mean[IDX_VY]]
    }

    pub fn psi(&self) -> f64 {
        self.mean[IDX_PSI]
    }

    pub fn extent(&self) -> DVectorView<'_, f64> {
        self.mean.rows(KINEMATIC_DIM, self.basis.len())
    }
}

/// Prior variances used when a track is started from its first scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub position_var: f64,
    pub velocity_var: f64,
    pub psi_var: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            position_var: 4.0,
            velocity_var: 1.0,
            psi_var: (PI / 4.0) * (PI / 4.0),
        }
    }
}

/// Container for the point measurements of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub time: f64,
    pub points: Vec<Point>,
}

impl Scan {
    pub fn new(time: f64, points: Vec<Point>) -> Result<Self> {
        if !time.is_finite() {
            return Err(Error::invalid("scan time must be finite"));
        }
        if points.is_empty() {
            return Err(Error::invalid("scan must contain at least one point"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scan points must be finite"));
        }
        Ok(Scan { time, points })
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }
}

/// Starts a track at the centroid of `scan`, at rest, with `ψ = 0` and the
/// extent at its GP prior.
pub fn initialize_from_scan(
    scan: &Scan,
    basis: &InputGrid,
    hp: &GpHyperParams,
    init: &InitConfig,
) -> Result<TrackState> {
    let projector = BasisProjector::new(basis, hp)?;
    let n = basis.len();
    let dim = KINEMATIC_DIM + n;
    let c = scan.centroid();
    let mut mean = DVector::from_element(dim, hp.prior_mean);
    mean[IDX_X] = c[0];
    mean[IDX_Y] = c[1];
    mean[IDX_VX] = 0.0;
    mean[IDX_VY] = 0.0;
    mean[IDX_PSI] = 0.0;

    let mut cov = DMatrix::zeros(dim, dim);
    cov[(IDX_X, IDX_X)] = init.position_var;
    cov[(IDX_Y, IDX_Y)] = init.position_var;
    cov[(IDX_VX, IDX_VX)] = init.velocity_var;
    cov[(IDX_VY, IDX_VY)] = init.velocity_var;
    cov[(IDX_PSI, IDX_PSI)] = init.psi_var;
    cov.view_mut((KINEMATIC_DIM, KINEMATIC_DIM), (n, n))
        .copy_from(projector.basis_covariance());
    TrackState::new(mean, cov, basis.clone(), *hp, scan.time)
}
