//! Synthetic scenarios: star-convex shapes moving along piecewise-linear
//! paths at fixed orientation, observed by noisy contour point scans.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::tracker::{track_scans, Scan, TrackRun, TrackerConfig};
use crate::Point;

/// Vertices used for ground-truth contours.
pub const TRUTH_CONTOUR_VERTICES: usize = 360;

/// Radial description of a star-convex shape in its local frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeForm {
    Circle {
        radius: f64,
    },
    /// Semi-axis `semi_x` along the local x axis.
    Ellipse {
        semi_x: f64,
        semi_y: f64,
    },
    Rectangle {
        half_width: f64,
        half_height: f64,
    },
    /// `|x/a|^p + |y/b|^p = 1`; `p = 4` gives a rounded rectangle.
    Superellipse {
        half_width: f64,
        half_height: f64,
        exponent: f64,
    },
    /// Plus sign made of two crossing rectangular arms.
    Cross {
        arm_length: f64,
        arm_half_width: f64,
    },
    /// `r(θ) = base·(1 + amplitude·cos(lobes·θ))`.
    Star {
        base: f64,
        amplitude: f64,
        lobes: u32,
    },
    /// Radii at uniform angles `2πi/n`, linearly interpolated.
    Table {
        radii: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel {
    pub id: String,
    pub form: ShapeForm,
}

impl ShapeModel {
    pub fn new(id: impl Into<String>, form: ShapeForm) -> Result<Self> {
        let shape = ShapeModel {
            id: id.into(),
            form,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok = match &self.form {
            ShapeForm::Circle { radius } => positive(*radius),
            ShapeForm::Ellipse { semi_x, semi_y } => positive(*semi_x) && positive(*semi_y),
            ShapeForm::Rectangle {
                half_width,
                half_height,
            } => positive(*half_width) && positive(*half_height),
            ShapeForm::Superellipse {
                half_width,
                half_height,
                exponent,
            } => positive(*half_width) && positive(*half_height) && positive(*exponent),
            ShapeForm::Cross {
                arm_length,
                arm_half_width,
            } => positive(*arm_length) && positive(*arm_half_width),
            ShapeForm::Star {
                base,
                amplitude,
                lobes,
            } => positive(*base) && (0.0..1.0).contains(amplitude) && *lobes > 0,
            ShapeForm::Table { radii } => radii.len() >= 3 && radii.iter().all(|r| positive(*r)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid parameters for shape {}", self.id)))
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        shape_radius(self, theta)
    }

    /// Library shapes `S1`..`S5` plus `circle`.
    ///
    /// S1 five-lobe star, S2 cross, S3 ellipse, S4 rounded rectangle,
    /// S5 three-lobe blob.
    pub fn library(id: &str) -> Result<Self> {
        let form = match id {
            "S1" => ShapeForm::Star {
                base: 2.0,
                amplitude: 0.25,
                lobes: 5,
            },
            "S2" => ShapeForm::Cross {
                arm_length: 2.5,
                arm_half_width: 0.9,
            },
            "S3" => ShapeForm::Ellipse {
                semi_x: 2.5,
                semi_y: 1.2,
            },
            "S4" => ShapeForm::Superellipse {
                half_width: 2.5,
                half_height: 1.5,
                exponent: 4.0,
            },
            "S5" => ShapeForm::Star {
                base: 1.8,
                amplitude: 0.2,
                lobes: 3,
            },
            "circle" => ShapeForm::Circle { radius: 2.0 },
            "ellipse" => ShapeForm::Ellipse {
                semi_x: 2.5,
                semi_y: 1.5,
            },
            other => return Err(Error::invalid(format!("unknown library shape {other}"))),
        };
        ShapeModel::new(id, form)
    }
}

/// Distance from the local origin to the boundary along local angle `theta`.
pub fn shape_radius(shape: &ShapeModel, theta: f64) -> f64 {
    let (s, c) = libm::sincos(theta);
    match &shape.form {
        ShapeForm::Circle { radius } => *radius,
        ShapeForm::Ellipse { semi_x, semi_y } => {
            semi_x * semi_y / libm::hypot(semi_y * c, semi_x * s)
        }
        ShapeForm::Rectangle {
            half_width,
            half_height,
        } => box_radius(*half_width, *half_height, c, s),
        ShapeForm::Superellipse {
            half_width,
            half_height,
            exponent,
        } => {
            let sum = libm::pow(libm::fabs(c) / half_width, *exponent)
                + libm::pow(libm::fabs(s) / half_height, *exponent);
            libm::pow(sum, -1.0 / exponent)
        }
        ShapeForm::Cross {
            arm_length,
            arm_half_width,
        } => box_radius(*arm_length, *arm_half_width, c, s)
            .max(box_radius(*arm_half_width, *arm_length, c, s)),
        ShapeForm::Star {
            base,
            amplitude,
            lobes,
        } => base * (1.0 + amplitude * libm::cos(*lobes as f64 * theta)),
        ShapeForm::Table { radii } => {
            let n = radii.len();
            let pos = crate::linalg::wrap_two_pi(theta) / TAU * n as f64;
            let i = (libm::floor(pos) as usize).min(n - 1);
            let frac = pos - i as f64;
            radii[i] * (1.0 - frac) + radii[(i + 1) % n] * frac
        }
    }
}

fn box_radius(half_w: f64, half_h: f64, c: f64, s: f64) -> f64 {
    let along_x = if c == 0.0 { f64::INFINITY } else { half_w / libm::fabs(c) };
    let along_y = if s == 0.0 { f64::INFINITY } else { half_h / libm::fabs(s) };
    along_x.min(along_y)
}

/// Boundary polygon of `shape` placed at `center` with orientation `psi`.
pub fn shape_contour(shape: &ShapeModel, center: Point, psi: f64, vertices: usize) -> Vec<Point> {
    (0..vertices)
        .map(|i| {
            let theta = TAU * i as f64 / vertices as f64;
            let r = shape_radius(shape, theta);
            let (s, c) = libm::sincos(theta + psi);
            [center[0] + r * c, center[1] + r * s]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: f64,
    pub position: Point,
}

/// Number of points generated per scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointCount {
    Fixed(usize),
    /// Poisson-distributed count with the given mean, at least one.
    Poisson(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub shape: ShapeModel,
    pub waypoints: Vec<Waypoint>,
    /// Fixed orientation of the object, rad.
    pub orientation: f64,
    /// Scans per second.
    pub scan_rate: f64,
    pub points_per_scan: PointCount,
    /// True measurement noise standard deviation, m.
    pub noise_std: f64,
    /// Length of the scan sequence after the first waypoint, s.
    pub duration: f64,
}

impl Scenario {
    /// Desk-scale scenario: 231 scans at 10 Hz along a three-leg path with
    /// 20 points per scan and 0.1 m noise.
    pub fn desk_scale(shape: ShapeModel) -> Self {
        let wp = |time, x, y| Waypoint {
            time,
            position: [x, y],
        };
        Scenario {
            shape,
            waypoints: alloc::vec![
                wp(0.0, 0.0, 0.0),
                wp(8.0, 16.0, 0.0),
                wp(16.0, 24.0, 8.0),
                wp(23.0, 24.0, 20.0),
            ],
            orientation: PI / 6.0,
            scan_rate: 10.0,
            points_per_scan: PointCount::Fixed(20),
            noise_std: 0.1,
            duration: 23.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.waypoints.len() < 2 {
            return Err(Error::invalid("scenario needs at least two waypoints"));
        }
        if self
            .waypoints
            .iter()
            .any(|w| !w.time.is_finite() || w.position.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("waypoints must be finite"));
        }
        if self.waypoints.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::invalid("waypoint times must be strictly increasing"));
        }
        if !(self.scan_rate > 0.0 && self.scan_rate.is_finite()) {
            return Err(Error::invalid("scan_rate must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be non-negative"));
        }
        if !self.orientation.is_finite() {
            return Err(Error::invalid("orientation must be finite"));
        }
        match self.points_per_scan {
            PointCount::Fixed(0) => Err(Error::invalid("points_per_scan must be at least 1")),
            PointCount::Poisson(mean) if !(mean > 0.0 && mean.is_finite()) => {
                Err(Error::invalid("Poisson mean must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Scan timestamps `t₀ + k/scan_rate` covering the duration.
    pub fn scan_times(&self) -> Vec<f64> {
        let start = self.waypoints[0].time;
        // tolerate round-off in duration·rate
        let count = libm::floor(self.duration * self.scan_rate + 1e-9) as usize + 1;
        (0..count)
            .map(|k| start + k as f64 / self.scan_rate)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub time: f64,
    pub center: Point,
    pub velocity: Point,
    pub psi: f64,
    pub contour: Vec<Point>,
}

/// Ground truth at every scan time, interpolating linearly between waypoints.
pub fn generate_trajectory(scenario: &Scenario) -> Result<Vec<GroundTruthFrame>> {
    scenario.validate()?;
    let wps = &scenario.waypoints;
    let end = wps[wps.len() - 1].time;
    let last = wps[0].time + scenario.duration;
    if last > end + 1e-9 {
        return Err(Error::invalid(format!(
            "duration reaches t={last} beyond the last waypoint at t={end}"
        )));
    }
    let times = scenario.scan_times();
    Ok(times
        .into_iter()
        .map(|t| {
            // segment containing t; interior waypoints start the next segment
            let seg = wps
                .windows(2)
                .position(|w| t < w[1].time)
                .unwrap_or(wps.len() - 2);
            let (a, b) = (&wps[seg], &wps[seg + 1]);
            let span = b.time - a.time;
            let velocity = [
                (b.position[0] - a.position[0]) / span,
                (b.position[1] - a.position[1]) / span,
            ];
            let dt = t - a.time;
            let center = [
                a.position[0] + velocity[0] * dt,
                a.position[1] + velocity[1] * dt,
            ];
            GroundTruthFrame {
                time: t,
                center,
                velocity,
                psi: scenario.orientation,
                contour: shape_contour(
                    &scenario.shape,
                    center,
                    scenario.orientation,
                    TRUTH_CONTOUR_VERTICES,
                ),
            }
        })
        .collect())
}

/// Noisy contour points of `frame`, uniform in local angle.
pub fn generate_scan(frame: &GroundTruthFrame, scenario: &Scenario, seed: u64) -> Result<Scan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = match scenario.points_per_scan {
        PointCount::Fixed(n) => n,
        PointCount::Poisson(mean) => {
            let dist = Poisson::new(mean).map_err(|_| Error::invalid("invalid Poisson mean"))?;
            let draw: f64 = dist.sample(&mut rng);
            (draw as usize).max(1)
        }
    };
    let noise = Normal::new(0.0, scenario.noise_std)
        .map_err(|_| Error::invalid("noise_std must be non-negative"))?;
    let points = (0..count)
        .map(|_| {
            let theta = rng.random_range(0.0..TAU);
            let r = shape_radius(&scenario.shape, theta);
            let (s, c) = libm::sincos(theta + frame.psi);
            [
                frame.center[0] + r * c + noise.sample(&mut rng),
                frame.center[1] + r * s + noise.sample(&mut rng),
            ]
        })
        .collect();
    Scan::new(frame.time, points)
}

/// Child seed number `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Scans for every frame of one run.
pub fn generate_scans(
    truth: &[GroundTruthFrame],
    scenario: &Scenario,
    run_seed: u64,
) -> Result<Vec<Scan>> {
    truth
        .iter()
        .enumerate()
        .map(|(k, frame)| generate_scan(frame, scenario, derive_seed(run_seed, k as u64)))
        .collect()
}

/// Outcome of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub scans: Vec<Scan>,
    pub outcome: core::result::Result<TrackRun, String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub truth: Vec<GroundTruthFrame>,
    pub runs: Vec<RunRecord>,
}

impl MonteCarloResult {
    pub fn failed_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| !r.is_ok())
    }
}

/// One tracked run with seed `derive_seed(master_seed, index)`.
pub fn simulate_run(
    scenario: &Scenario,
    truth: &[GroundTruthFrame],
    config: &TrackerConfig,
    master_seed: u64,
    index: usize,
) -> Result<RunRecord> {
    let seed = derive_seed(master_seed, index as u64);
    let scans = generate_scans(truth, scenario, seed)?;
    let outcome = track_scans(config, &scans).map_err(|e| e.to_string());
    Ok(RunRecord {
        index,
        seed,
        scans,
        outcome,
    })
}

/// Runs `n_runs` independent tracked runs sequentially.
///
/// A tracker failure marks its run as failed instead of aborting the batch.
pub fn run_monte_carlo(
    scenario: &Scenario,
    config: &TrackerConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<MonteCarloResult> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be at least 1"));
    }
    config.validate()?;
    let truth = generate_trajectory(scenario)?;
    let runs = (0..n_runs)
        .map(|i| simulate_run(scenario, &truth, config, master_seed, i))
        .collect::<Result<_>>()?;
    Ok(MonteCarloResult { truth, runs })
}
