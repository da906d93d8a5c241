//! Covariance kernels, batch GP regression and the basis-point conditional
//! projection shared by the recursive estimators.
//!
//! Two input domains are supported. On the real line the squared-exponential
//! kernel `σ_f²·exp(−(a−b)²/(2l²))` is used; on the circle of angles the
//! periodic squared-exponential `σ_f²·exp(−2·sin²((a−b)/2)/l²)` keeps every
//! latent function 2π-periodic.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{factor_spd, symmetrize};

/// Inputs closer than this to a basis point are treated as that basis point.
const SNAP_TOLERANCE: f64 = 1e-12;

/// Input domain of a latent function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    ScalarLine,
    AngleCircle,
}

/// Hyperparameters of the GP prior and its observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyperParams {
    /// Kernel amplitude, in output units.
    pub sigma_f: f64,
    /// Characteristic length scale (radians on the circle).
    pub length_scale: f64,
    /// Measurement noise standard deviation, in output units.
    pub sigma_r: f64,
    /// Forgetting factor, 1/s.
    pub alpha: f64,
    /// Constant prior mean of the latent function.
    pub prior_mean: f64,
}

impl GpHyperParams {
    pub fn new(
        sigma_f: f64,
        length_scale: f64,
        sigma_r: f64,
        alpha: f64,
        prior_mean: f64,
    ) -> Result<Self> {
        let hp = GpHyperParams {
            sigma_f,
            length_scale,
            sigma_r,
            alpha,
            prior_mean,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.sigma_f,
            self.length_scale,
            self.sigma_r,
            self.alpha,
            self.prior_mean,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("hyperparameters must be finite"));
        }
        if self.sigma_f <= 0.0 {
            return Err(Error::invalid("sigma_f must be positive"));
        }
        if self.length_scale <= 0.0 {
            return Err(Error::invalid("length_scale must be positive"));
        }
        if self.sigma_r < 0.0 {
            return Err(Error::invalid("sigma_r must be non-negative"));
        }
        if self.alpha < 0.0 {
            return Err(Error::invalid("alpha must be non-negative"));
        }
        Ok(())
    }

    /// Prior marginal variance `σ_f²`.
    pub fn signal_variance(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma_r * self.sigma_r
    }
}

/// Ordered set of input locations, e.g. the basis points of a recursive GP.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrid {
    kind: KernelKind,
    points: Vec<f64>,
}

impl InputGrid {
    pub fn new(kind: KernelKind, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("input grid must not be empty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("input grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("input grid points must be strictly increasing"));
        }
        if kind == KernelKind::AngleCircle && points.iter().any(|p| !(0.0..TAU).contains(p)) {
            return Err(Error::invalid("angle grid points must lie in [0, 2π)"));
        }
        Ok(InputGrid { kind, points })
    }

    /// `n` equally spaced angles `2πi/n`.
    pub fn uniform_angles(n: usize) -> Result<Self> {
        let points = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        Self::new(KernelKind::AngleCircle, points)
    }

    /// `n` equally spaced points covering `[start, end]` on the line.
    pub fn linspace(start: f64, end: f64, n: usize) -> Result<Self> {
        let points = match n {
            0 => Vec::new(),
            1 => alloc::vec![start],
            _ => (0..n)
                .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(KernelKind::ScalarLine, points)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point coinciding with `x`, if any.
    pub fn locate(&self, x: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|&p| input_distance(p, x, self.kind) < SNAP_TOLERANCE)
    }
}

fn input_distance(a: f64, b: f64, kind: KernelKind) -> f64 {
    match kind {
        KernelKind::ScalarLine => libm::fabs(a - b),
        KernelKind::AngleCircle => {
            let d = libm::fmod(libm::fabs(a - b), TAU);
            d.min(TAU - d)
        }
    }
}

/// Gaussian distribution over latent function values at a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Marginal standard deviations, with round-off negatives clamped to zero.
    pub fn stddev(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.cov.diagonal().iter().map(|v| libm::sqrt(v.max(0.0))),
        )
    }
}

/// Covariance between inputs `a` and `b`.
pub fn kernel_eval(a: f64, b: f64, hp: &GpHyperParams, kind: KernelKind) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("kernel inputs must be finite"));
    }
    hp.validate()?;
    Ok(kernel_unchecked(a, b, hp, kind))
}

pub(crate) fn kernel_unchecked(a: f64, b: f64, hp: &GpHyperParams, kind: KernelKind) -> f64 {
    let l2 = hp.length_scale * hp.length_scale;
    let exponent = match kind {
        KernelKind::ScalarLine => {
            let d = a - b;
            -d * d / (2.0 * l2)
        }
        KernelKind::AngleCircle => {
            let s = libm::sin(0.5 * (a - b));
            -2.0 * s * s / l2
        }
    };
    hp.signal_variance() * libm::exp(exponent)
}

/// Derivative of the kernel with respect to its first argument.
pub(crate) fn kernel_derivative(a: f64, b: f64, hp: &GpHyperParams, kind: KernelKind) -> f64 {
    let k = kernel_unchecked(a, b, hp, kind);
    let l2 = hp.length_scale * hp.length_scale;
    match kind {
        KernelKind::ScalarLine => -k * (a - b) / l2,
        KernelKind::AngleCircle => -k * libm::sin(a - b) / l2,
    }
}

/// Cross-covariance matrix `K(A, B)`.
pub fn kernel_matrix(
    a: &[f64],
    b: &[f64],
    hp: &GpHyperParams,
    kind: KernelKind,
) -> Result<DMatrix<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("kernel matrix inputs must be non-empty"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("kernel inputs must be finite"));
    }
    hp.validate()?;
    Ok(kernel_matrix_unchecked(a, b, hp, kind))
}

pub(crate) fn kernel_matrix_unchecked(
    a: &[f64],
    b: &[f64],
    hp: &GpHyperParams,
    kind: KernelKind,
) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        kernel_unchecked(a[i], b[j], hp, kind)
    })
}

/// Full (batch) GP posterior at `query` given noisy observations.
///
/// Observations carry noise variance `σ_r²`; the prior has constant mean
/// `hp.prior_mean`. With no training data the prior is returned.
pub fn gp_regress(
    train_inputs: &[f64],
    train_outputs: &[f64],
    query: &[f64],
    hp: &GpHyperParams,
    kind: KernelKind,
) -> Result<GaussianBelief> {
    if train_inputs.len() != train_outputs.len() {
        return Err(Error::invalid(format!(
            "training inputs ({}) and outputs ({}) differ in length",
            train_inputs.len(),
            train_outputs.len()
        )));
    }
    if train_outputs.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("training outputs must be finite"));
    }
    let k_qq = kernel_matrix(query, query, hp, kind)?;
    if train_inputs.is_empty() {
        return Ok(GaussianBelief {
            mean: DVector::from_element(query.len(), hp.prior_mean),
            cov: k_qq,
        });
    }
    let mut k_tt = kernel_matrix(train_inputs, train_inputs, hp, kind)?;
    for i in 0..k_tt.nrows() {
        k_tt[(i, i)] += hp.noise_variance();
    }
    let chol = factor_spd(&k_tt, hp.signal_variance(), "training covariance")?;
    let k_tq = kernel_matrix_unchecked(train_inputs, query, hp, kind);

    let residual = DVector::from_iterator(
        train_outputs.len(),
        train_outputs.iter().map(|y| y - hp.prior_mean),
    );
    let weights = chol.solve(&residual);
    let mean = k_tq.tr_mul(&weights).add_scalar(hp.prior_mean);

    let mut v = k_tq;
    chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let mut cov = k_qq - v.tr_mul(&v);
    symmetrize(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

/// Linear map from basis values to query values, plus the residual
/// covariance left unexplained by the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `K_qb·K_bb⁻¹`, one row per query input.
    pub h: DMatrix<f64>,
    /// `K_qq − K_qb·K_bb⁻¹·K_bq`.
    pub r_extra: DMatrix<f64>,
}

/// Projection of a single query input, with the derivative of its row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProjection {
    pub h: RowDVector<f64>,
    /// Derivative of `h` with respect to the query input.
    pub dh: RowDVector<f64>,
    pub r_extra: f64,
}

/// Factorized basis covariance, reusable for many projections.
#[derive(Debug, Clone)]
pub struct BasisProjector {
    basis: InputGrid,
    hp: GpHyperParams,
    k_bb: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl BasisProjector {
    pub fn new(basis: &InputGrid, hp: &GpHyperParams) -> Result<Self> {
        hp.validate()?;
        let k_bb = kernel_matrix_unchecked(basis.points(), basis.points(), hp, basis.kind());
        let chol = factor_spd(&k_bb, hp.signal_variance(), "basis covariance")?;
        Ok(BasisProjector {
            basis: basis.clone(),
            hp: *hp,
            k_bb,
            chol,
        })
    }

    pub fn basis(&self) -> &InputGrid {
        &self.basis
    }

    pub fn hyper_params(&self) -> &GpHyperParams {
        &self.hp
    }

    /// Prior covariance of the basis values, `K_bb`.
    pub fn basis_covariance(&self) -> &DMatrix<f64> {
        &self.k_bb
    }

    /// Rows of `H` only, skipping the residual covariance.
    pub fn interpolation_matrix(&self, query: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.interpolation_rows(query)?.0)
    }

    fn interpolation_rows(
        &self,
        query: &[f64],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<Option<usize>>)> {
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("query inputs must be finite"));
        }
        let kind = self.basis.kind();
        let n = self.basis.len();
        let snapped: Vec<Option<usize>> = query.iter().map(|&x| self.basis.locate(x)).collect();

        let k_bq = kernel_matrix_unchecked(self.basis.points(), query, &self.hp, kind);
        // Hᵀ = K_bb⁻¹·K_bq
        let mut h = self.chol.solve(&k_bq).transpose();
        for (row, snap) in snapped.iter().enumerate() {
            if let Some(idx) = snap {
                for col in 0..n {
                    h[(row, col)] = if col == *idx { 1.0 } else { 0.0 };
                }
            }
        }
        Ok((h, k_bq, snapped))
    }

    pub fn project(&self, query: &[f64]) -> Result<Projection> {
        let (h, k_bq, snapped) = self.interpolation_rows(query)?;
        let k_qq = kernel_matrix_unchecked(query, query, &self.hp, self.basis.kind());
        let mut r_extra = k_qq - &h * &k_bq;
        for (row, snap) in snapped.iter().enumerate() {
            if snap.is_some() {
                r_extra.row_mut(row).fill(0.0);
                r_extra.column_mut(row).fill(0.0);
            }
        }
        symmetrize(&mut r_extra);
        Ok(Projection { h, r_extra })
    }

    /// Projection row at one input together with its derivative.
    pub fn project_point(&self, x: f64) -> Result<PointProjection> {
        if !x.is_finite() {
            return Err(Error::invalid("query input must be finite"));
        }
        let kind = self.basis.kind();
        let n = self.basis.len();
        let pts = self.basis.points();
        let k_bx = DVector::from_fn(n, |i, _| kernel_unchecked(x, pts[i], &self.hp, kind));
        let dk_bx = DVector::from_fn(n, |i, _| kernel_derivative(x, pts[i], &self.hp, kind));
        let dh = self.chol.solve(&dk_bx).transpose();

        if let Some(idx) = self.basis.locate(x) {
            let mut h = RowDVector::zeros(n);
            h[idx] = 1.0;
            return Ok(PointProjection { h, dh, r_extra: 0.0 });
        }
        let h = self.chol.solve(&k_bx).transpose();
        let r_extra = self.hp.signal_variance() - (&h * &k_bx)[0];
        Ok(PointProjection { h, dh, r_extra })
    }
}

/// `H = K_qb·K_bb⁻¹` and `R_extra = K_qq − K_qb·K_bb⁻¹·K_bq` for `query`.
///
/// Queries that coincide with a basis point get an exact one-hot row and a
/// zero residual.
pub fn conditional_projection(
    query: &[f64],
    basis: &InputGrid,
    hp: &GpHyperParams,
) -> Result<Projection> {
    BasisProjector::new(basis, hp)?.project(query)
}
