//! GP-EKF extended object tracker and its fixed-lag smoothed variant.
//!
//! The state stacks the kinematics `[x, y, ẋ, ẏ]`, the orientation `ψ` and
//! the extent radii at `N` basis angles of the object frame. Each scan is
//! absorbed in one stacked EKF update; the optional lag window turns the
//! filter output into fixed-lag RTS estimates.

mod measurement;
mod process;
mod smoother;
mod state;

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

pub use measurement::{
    contour_estimate, contour_from_extent, ekf_update_scan, ekf_update_scan_with, kalman_update,
    measurement_model, ContourModel, PointLinearization, PointMeasurementModel,
};
pub use process::{ekf_predict, make_process_model, predict_with_model, ProcessNoiseConfig};
pub use smoother::{smoother_push, LagEntry, LagWindow};
pub use state::{
    initialize_from_scan, InitConfig, Scan, TrackState, IDX_PSI, IDX_VX, IDX_VY, IDX_X, IDX_Y,
    KINEMATIC_DIM,
};

use crate::error::{Error, Result};
use crate::gp_model::{GpHyperParams, InputGrid};
use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub hp: GpHyperParams,
    pub process_noise: ProcessNoiseConfig,
    /// Number of uniformly spaced extent basis angles.
    pub basis_size: usize,
    /// Fixed lag of the smoother, in scans.
    pub lag: usize,
    pub use_smoother: bool,
    pub init: InitConfig,
}

impl TrackerConfig {
    /// Parameters tuned for the synthetic scenarios.
    pub fn simulation_defaults() -> Self {
        TrackerConfig {
            hp: GpHyperParams {
                sigma_f: 2.0,
                length_scale: PI / 10.0,
                sigma_r: 0.8,
                alpha: 0.004,
                prior_mean: 1.0,
            },
            process_noise: ProcessNoiseConfig {
                sigma_q: 1.0,
                sigma_q_psi: 0.0001,
            },
            basis_size: 20,
            lag: 10,
            use_smoother: false,
            init: InitConfig::default(),
        }
    }

    /// Parameters tuned for recorded lidar data.
    pub fn real_data_defaults() -> Self {
        TrackerConfig {
            hp: GpHyperParams {
                sigma_f: 4.0,
                length_scale: PI / 12.0,
                sigma_r: 0.8,
                alpha: 0.08,
                prior_mean: 1.0,
            },
            process_noise: ProcessNoiseConfig {
                sigma_q: 3.0,
                sigma_q_psi: 0.000001,
            },
            ..Self::simulation_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.process_noise.validate()?;
        if self.basis_size < 3 {
            return Err(Error::invalid("basis_size must be at least 3"));
        }
        let init = [
            self.init.position_var,
            self.init.velocity_var,
            self.init.psi_var,
        ];
        if init.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("initial variances must be positive"));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<InputGrid> {
        InputGrid::uniform_angles(self.basis_size)
    }
}

/// Mean-only snapshot of a track, cheap to keep for every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEstimate {
    pub time: f64,
    pub center: Point,
    pub velocity: Point,
    pub psi: f64,
    pub extent: Vec<f64>,
}

impl From<&TrackState> for TrackEstimate {
    fn from(s: &TrackState) -> Self {
        TrackEstimate {
            time: s.time,
            center: s.center(),
            velocity: s.velocity(),
            psi: s.psi(),
            extent: s.extent().iter().copied().collect(),
        }
    }
}

/// Output of one tracker step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub filtered: TrackState,
    /// Smoothed state leaving the lag window at this step, if any.
    pub emitted: Option<TrackState>,
}

/// Sequential GP-EKF over scans, optionally feeding a lag window.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    basis: InputGrid,
    state: Option<TrackState>,
    window: Option<LagWindow>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let basis = config.basis()?;
        let window = config.use_smoother.then(|| LagWindow::new(config.lag));
        Ok(Tracker {
            config,
            basis,
            state: None,
            window,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&TrackState> {
        self.state.as_ref()
    }

    pub fn window(&self) -> Option<&LagWindow> {
        self.window.as_ref()
    }

    pub fn process_scan(&mut self, scan: &Scan) -> Result<StepOutput> {
        let (predicted, transition) = match &self.state {
            None => {
                let prior =
                    initialize_from_scan(scan, &self.basis, &self.config.hp, &self.config.init)?;
                let dim = prior.dim();
                (prior, DMatrix::identity(dim, dim))
            }
            Some(prev) => {
                let dt = scan.time - prev.time;
                if !(dt > 0.0) {
                    return Err(Error::invalid("scan times must be strictly increasing"));
                }
                let (f, q) =
                    make_process_model(dt, &self.config.process_noise, &prev.hp, &prev.basis)?;
                (predict_with_model(prev, dt, &f, &q), f)
            }
        };
        let filtered = ekf_update_scan(&predicted, scan)?;
        self.state = Some(filtered.clone());

        let emitted = match self.window.take() {
            Some(window) => {
                let (window, out) =
                    smoother_push(window, filtered.clone(), predicted, transition)?;
                self.window = Some(window);
                out
            }
            None => None,
        };
        Ok(StepOutput { filtered, emitted })
    }

    /// Smoothed states still held in the lag window, oldest first.
    pub fn finish(self) -> Result<Vec<TrackState>> {
        match self.window {
            Some(window) => window.flush(),
            None => Ok(Vec::new()),
        }
    }
}

/// Filtered and (optionally) fixed-lag smoothed estimates for every scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRun {
    pub filtered: Vec<TrackEstimate>,
    pub smoothed: Option<Vec<TrackEstimate>>,
}

/// Runs a tracker over `scans`, keeping mean estimates for every frame.
pub fn track_scans(config: &TrackerConfig, scans: &[Scan]) -> Result<TrackRun> {
    let mut tracker = Tracker::new(config.clone())?;
    let mut filtered = Vec::with_capacity(scans.len());
    let mut smoothed = Vec::with_capacity(scans.len());
    for scan in scans {
        let out = tracker.process_scan(scan)?;
        filtered.push(TrackEstimate::from(&out.filtered));
        if let Some(s) = out.emitted {
            smoothed.push(TrackEstimate::from(&s));
        }
    }
    let use_smoother = config.use_smoother;
    smoothed.extend(tracker.finish()?.iter().map(TrackEstimate::from));
    Ok(TrackRun {
        filtered,
        smoothed: use_smoother.then_some(smoothed),
    })
}
