//! Fixed-lag Rauch–Tung–Striebel smoothing over a sliding window of scans.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::state::{TrackState, IDX_PSI};
use crate::error::Result;
use crate::linalg::{factor_spd, symmetrize, wrap_pi};

/// Forward-pass record of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LagEntry {
    pub filtered: TrackState,
    /// Prior at this scan given the previous one.
    pub predicted: TrackState,
    /// Transition from the previous scan into this one.
    pub transition: DMatrix<f64>,
}

/// The last `lag + 1` forward-pass records.
#[derive(Debug, Clone, PartialEq)]
pub struct LagWindow {
    lag: usize,
    entries: VecDeque<LagEntry>,
}

impl LagWindow {
    pub fn new(lag: usize) -> Self {
        LagWindow {
            lag,
            entries: VecDeque::with_capacity(lag + 1),
        }
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LagEntry> {
        self.entries.iter()
    }

    /// RTS backward pass over the window, oldest first. The newest element
    /// is the filtered state itself.
    pub fn smoothed(&self) -> Result<Vec<TrackState>> {
        let n = self.entries.len();
        let mut out: Vec<TrackState> = Vec::with_capacity(n);
        let Some(newest) = self.entries.back() else {
            return Ok(out);
        };
        out.push(newest.filtered.clone());
        for k in (0..n - 1).rev() {
            let current = &self.entries[k].filtered;
            let next = &self.entries[k + 1];
            let later = out.last().expect("window pass starts from the newest state");

            let p_pred = &next.predicted.cov;
            let scale = (p_pred.trace() / p_pred.nrows() as f64).max(f64::MIN_POSITIVE);
            let chol = factor_spd(p_pred, scale, "predicted covariance")?;
            // G = P·Fᵀ·P⁻⁻¹, so Gᵀ = P⁻⁻¹·F·P
            let gain = chol.solve(&(&next.transition * &current.cov)).transpose();

            let mut diff = &later.mean - &next.predicted.mean;
            diff[IDX_PSI] = wrap_pi(diff[IDX_PSI]);
            let mut mean = &current.mean + &gain * diff;
            mean[IDX_PSI] = wrap_pi(mean[IDX_PSI]);
            let mut cov = &current.cov + &gain * (&later.cov - p_pred) * gain.transpose();
            symmetrize(&mut cov);
            out.push(TrackState {
                mean,
                cov,
                basis: current.basis.clone(),
                hp: current.hp,
                time: current.time,
            });
        }
        out.reverse();
        Ok(out)
    }

    /// Smooths and drains every remaining entry, oldest first.
    pub fn flush(mut self) -> Result<Vec<TrackState>> {
        let out = self.smoothed()?;
        self.entries.clear();
        Ok(out)
    }
}

/// Appends a forward-pass record and returns the smoothed state leaving the
/// window, if the window has reached `lag + 1` entries.
///
/// A state is emitted once `lag` newer scans have been absorbed; with
/// `lag = 0` the emitted state is the filtered one.
pub fn smoother_push(
    mut window: LagWindow,
    filtered: TrackState,
    predicted: TrackState,
    transition: DMatrix<f64>,
) -> Result<(LagWindow, Option<TrackState>)> {
    window.entries.push_back(LagEntry {
        filtered,
        predicted,
        transition,
    });
    if window.entries.len() < window.lag + 1 {
        return Ok((window, None));
    }
    let smoothed = window.smoothed()?;
    window.entries.pop_front();
    let oldest = smoothed.into_iter().next();
    Ok((window, oldest))
}
