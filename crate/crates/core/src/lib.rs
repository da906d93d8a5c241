//! Gaussian-process extended object tracking.
//!
//! * [`gp_model`]: kernels, batch GP regression and the basis-point projection.
//! * [`rgp`]: recursive GP regression over basis points.
//! * [`tracker`]: GP-EKF tracker with orientation and star-convex extent, and
//!   the fixed-lag RTS smoother built on it.
//! * [`sim`]: parametric shapes, trajectories, noisy scans and Monte Carlo runs.
//! * [`metrics`]: shape precision/recall, center-of-object RMSE and percentage
//!   improvement.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod demo;
mod error;
pub mod gp_model;
pub mod linalg;
pub mod metrics;
pub mod rgp;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};

/// A 2-D point or vector in metres.
pub type Point = [f64; 2];
