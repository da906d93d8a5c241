//! Experiment configuration: a TOML key tree in which every key is optional.
//!
//! ```toml
//! seed = 7
//! runs = 100
//! out = "out"
//! workers = 0                  # 0 uses every available core
//! snapshot_frames = [1, 50, 150, 230]
//! resolution = 100.0           # raster cells per metre
//! baseline = "GP-EKF"
//!
//! [tracker]                    # simulation or real-data defaults by mode
//! sigma_q = 1.0
//! sigma_q_psi = 0.0001
//! sigma_f = 2.0
//! sigma_r = 0.8
//! length_scale = 0.3141592653589793
//! alpha = 0.004
//! prior_mean = 1.0
//! basis_size = 20
//! lag = 10
//! use_smoother = true
//! init_position_var = 4.0
//! init_velocity_var = 1.0
//! init_psi_var = 0.6168502750680849
//!
//! [scenario]
//! shapes = ["S1", "S2", "S3", "S4", "S5"]
//! waypoints = [[0.0, 0.0, 0.0], [8.0, 16.0, 0.0], [16.0, 24.0, 8.0], [23.0, 24.0, 20.0]]
//! orientation = 0.5235987755982988
//! scan_rate = 10.0
//! points_per_scan = 20         # or poisson_mean = 20.0
//! noise_std = 0.1
//! duration = 23.0
//! [scenario.shape_tables]      # extra shapes as radii at uniform angles
//! blob = [2.0, 2.5, 1.5, 2.2]
//!
//! [demo]
//! n_measurements = 30
//! noise_std = 0.2
//! distinct_inputs = 10
//! basis_sizes = [5, 10, 20]
//! query_points = 200
//! domain = [0.0, 10.0]
//! sigma_f = 1.0
//! length_scale = 1.0
//! sigma_r = 0.2
//!
//! [data]
//! scans = "scans.csv"
//! truth = "truth.csv"
//! contours = "truth_contours.csv"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gpett_core::demo::DemoConfig;
use gpett_core::gp_model::GpHyperParams;
use gpett_core::sim::{PointCount, Scenario, ShapeForm, ShapeModel, Waypoint};
use gpett_core::tracker::TrackerConfig;
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    RegressDemo,
    Simulate,
    Track,
    Benchmark,
    RealData,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::RegressDemo => "regress-demo",
            Mode::Simulate => "simulate",
            Mode::Track => "track",
            Mode::Benchmark => "benchmark",
            Mode::RealData => "real-data",
        }
    }

    fn from_name(name: &str) -> Option<Mode> {
        [
            Mode::RegressDemo,
            Mode::Simulate,
            Mode::Track,
            Mode::Benchmark,
            Mode::RealData,
        ]
        .into_iter()
        .find(|m| m.name() == name)
    }

    fn uses_real_data_defaults(self) -> bool {
        matches!(self, Mode::Track | Mode::RealData)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    seed: Option<u64>,
    runs: Option<usize>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    snapshot_frames: Option<Vec<usize>>,
    resolution: Option<f64>,
    baseline: Option<String>,
    #[serde(default)]
    tracker: RawTracker,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    demo: RawDemo,
    #[serde(default)]
    data: RawData,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTracker {
    sigma_q: Option<f64>,
    sigma_q_psi: Option<f64>,
    sigma_f: Option<f64>,
    sigma_r: Option<f64>,
    length_scale: Option<f64>,
    alpha: Option<f64>,
    prior_mean: Option<f64>,
    basis_size: Option<usize>,
    lag: Option<usize>,
    use_smoother: Option<bool>,
    init_position_var: Option<f64>,
    init_velocity_var: Option<f64>,
    init_psi_var: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    shapes: Option<Vec<String>>,
    waypoints: Option<Vec<[f64; 3]>>,
    orientation: Option<f64>,
    scan_rate: Option<f64>,
    points_per_scan: Option<usize>,
    poisson_mean: Option<f64>,
    noise_std: Option<f64>,
    duration: Option<f64>,
    #[serde(default)]
    shape_tables: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemo {
    n_measurements: Option<usize>,
    noise_std: Option<f64>,
    distinct_inputs: Option<usize>,
    basis_sizes: Option<Vec<usize>>,
    query_points: Option<usize>,
    domain: Option<[f64; 2]>,
    sigma_f: Option<f64>,
    length_scale: Option<f64>,
    sigma_r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    scans: Option<PathBuf>,
    truth: Option<PathBuf>,
    contours: Option<PathBuf>,
}

/// Settings of the one-dimensional regression demo.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSettings {
    pub base: DemoConfig,
    pub distinct_inputs: usize,
    pub basis_sizes: Vec<usize>,
}

/// Input files of the real-data and track modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataPaths {
    pub scans: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub contours: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub lag: Option<usize>,
    pub smoother: bool,
    pub workers: Option<usize>,
    pub scans: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub contours: Option<PathBuf>,
}

/// Fully defaulted and validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub master_seed: u64,
    pub n_runs: usize,
    pub out_dir: PathBuf,
    /// Worker threads for Monte Carlo runs; 0 means available parallelism.
    pub workers: usize,
    /// 1-based frame numbers to draw.
    pub snapshot_frames: Vec<usize>,
    pub resolution: f64,
    pub baseline: Option<String>,
    pub tracker: TrackerConfig,
    /// One scenario per shape, in table column order.
    pub scenarios: Vec<Scenario>,
    pub demo: DemoSettings,
    pub data: DataPaths,
}

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_LAG: usize = 10;
pub const DEFAULT_SNAPSHOT_FRAMES: [usize; 4] = [1, 50, 150, 230];
pub const FILTER_METHOD: &str = "GP-EKF";
pub const SMOOTHER_METHOD: &str = "GP-RTSS";

fn config_err(message: impl Into<String>) -> HarnessError {
    HarnessError::Config(message.into())
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies defaults for `mode`, then `overrides`.
    pub fn load(mode: Mode, path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(mode, &text, overrides)
    }

    pub fn from_toml(mode: Mode, text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if let Some(name) = &raw.mode {
            match Mode::from_name(name) {
                Some(m) if m == mode => {}
                Some(m) => {
                    return Err(config_err(format!(
                        "config mode {} does not match subcommand {}",
                        m.name(),
                        mode.name()
                    )))
                }
                None => return Err(config_err(format!("unknown mode {name:?}"))),
            }
        }
        let tracker = resolve_tracker(mode, &raw.tracker, overrides)?;
        let scenarios = resolve_scenarios(mode, &raw.scenario)?;
        let seed = overrides.seed.or(raw.seed).unwrap_or(DEFAULT_SEED);
        let demo = resolve_demo(&raw.demo, seed)?;

        let n_runs = overrides.runs.or(raw.runs).unwrap_or(DEFAULT_RUNS);
        if n_runs == 0 {
            return Err(config_err("runs must be at least 1"));
        }
        let resolution = raw.resolution.unwrap_or(gpett_core::metrics::DEFAULT_RESOLUTION);
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(config_err("resolution must be positive"));
        }
        let snapshot_frames = raw
            .snapshot_frames
            .unwrap_or_else(|| DEFAULT_SNAPSHOT_FRAMES.to_vec());
        if snapshot_frames.contains(&0) {
            return Err(config_err("snapshot frames are 1-based"));
        }

        let methods = method_names(&tracker);
        let baseline = match raw.baseline {
            Some(b) if !methods.contains(&b.as_str()) => {
                return Err(config_err(format!(
                    "unknown baseline {b:?}; methods are {}",
                    methods.join(", ")
                )))
            }
            Some(b) => Some(b),
            None if methods.len() > 1 => Some(FILTER_METHOD.to_string()),
            None => None,
        };

        let data = DataPaths {
            scans: overrides.scans.clone().or(raw.data.scans),
            truth: overrides.truth.clone().or(raw.data.truth),
            contours: overrides.contours.clone().or(raw.data.contours),
        };
        if mode.uses_real_data_defaults() {
            if data.scans.is_none() {
                return Err(config_err("a scan file is required (data.scans or --scans)"));
            }
            if mode == Mode::RealData && data.truth.is_some() != data.contours.is_some() {
                return Err(config_err(
                    "truth and contour files must be given together",
                ));
            }
            for p in [&data.scans, &data.truth, &data.contours].into_iter().flatten() {
                if !p.is_file() {
                    return Err(config_err(format!("input file {} does not exist", p.display())));
                }
            }
        }

        Ok(ExperimentConfig {
            mode,
            master_seed: seed,
            n_runs,
            out_dir: overrides
                .out
                .clone()
                .or(raw.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            workers: overrides.workers.or(raw.workers).unwrap_or(0),
            snapshot_frames,
            resolution,
            baseline,
            tracker,
            scenarios,
            demo,
            data,
        })
    }

    /// Reported methods: the filter, then the smoother when enabled.
    pub fn methods(&self) -> Vec<&'static str> {
        method_names(&self.tracker)
    }
}

fn method_names(tracker: &TrackerConfig) -> Vec<&'static str> {
    if tracker.use_smoother {
        vec![FILTER_METHOD, SMOOTHER_METHOD]
    } else {
        vec![FILTER_METHOD]
    }
}

fn resolve_tracker(mode: Mode, raw: &RawTracker, ov: &Overrides) -> Result<TrackerConfig> {
    let mut t = if mode.uses_real_data_defaults() {
        TrackerConfig::real_data_defaults()
    } else {
        TrackerConfig::simulation_defaults()
    };
    t.lag = DEFAULT_LAG;
    // benchmarks compare the filter against the smoother by default
    t.use_smoother = mode == Mode::Benchmark;

    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut t.process_noise.sigma_q, raw.sigma_q);
    set(&mut t.process_noise.sigma_q_psi, raw.sigma_q_psi);
    set(&mut t.hp.sigma_f, raw.sigma_f);
    set(&mut t.hp.sigma_r, raw.sigma_r);
    set(&mut t.hp.length_scale, raw.length_scale);
    set(&mut t.hp.alpha, raw.alpha);
    set(&mut t.hp.prior_mean, raw.prior_mean);
    set(&mut t.init.position_var, raw.init_position_var);
    set(&mut t.init.velocity_var, raw.init_velocity_var);
    set(&mut t.init.psi_var, raw.init_psi_var);
    if let Some(n) = raw.basis_size {
        t.basis_size = n;
    }
    if let Some(l) = ov.lag.or(raw.lag) {
        t.lag = l;
    }
    if let Some(s) = raw.use_smoother {
        t.use_smoother = s;
    }
    if ov.smoother {
        t.use_smoother = true;
    }
    if [t.init.position_var, t.init.velocity_var, t.init.psi_var]
        .iter()
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(config_err("initial variances must be positive"));
    }
    t.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(t)
}

fn resolve_scenarios(mode: Mode, raw: &RawScenario) -> Result<Vec<Scenario>> {
    let default_shapes: &[&str] = match mode {
        Mode::Benchmark => &["S1", "S2", "S3", "S4", "S5"],
        _ => &["S1"],
    };
    let ids: Vec<String> = raw
        .shapes
        .clone()
        .unwrap_or_else(|| default_shapes.iter().map(|s| s.to_string()).collect());
    if ids.is_empty() {
        return Err(config_err("scenario.shapes must not be empty"));
    }
    let mut seen = Vec::new();
    ids.iter()
        .map(|id| {
            if seen.contains(id) {
                return Err(config_err(format!("shape {id} listed twice")));
            }
            seen.push(id.clone());
            let shape = match raw.shape_tables.get(id) {
                Some(radii) => ShapeModel::new(id.clone(), ShapeForm::Table { radii: radii.clone() }),
                None => ShapeModel::library(id),
            }
            .map_err(|e| config_err(e.to_string()))?;
            let mut s = Scenario::desk_scale(shape);
            if let Some(wps) = &raw.waypoints {
                s.waypoints = wps
                    .iter()
                    .map(|w| Waypoint {
                        time: w[0],
                        position: [w[1], w[2]],
                    })
                    .collect();
            }
            if let Some(v) = raw.orientation {
                s.orientation = v;
            }
            if let Some(v) = raw.scan_rate {
                s.scan_rate = v;
            }
            match (raw.points_per_scan, raw.poisson_mean) {
                (Some(_), Some(_)) => {
                    return Err(config_err(
                        "set either points_per_scan or poisson_mean, not both",
                    ))
                }
                (Some(n), None) => s.points_per_scan = PointCount::Fixed(n),
                (None, Some(m)) => s.points_per_scan = PointCount::Poisson(m),
                (None, None) => {}
            }
            if let Some(v) = raw.noise_std {
                s.noise_std = v;
            }
            if let Some(v) = raw.duration {
                s.duration = v;
            }
            s.validate().map_err(|e| config_err(e.to_string()))?;
            let span = s.waypoints[s.waypoints.len() - 1].time - s.waypoints[0].time;
            if s.duration > span + 1e-9 {
                return Err(config_err(format!(
                    "scenario duration {} exceeds the waypoint span {span}",
                    s.duration
                )));
            }
            Ok(s)
        })
        .collect()
}

fn resolve_demo(raw: &RawDemo, seed: u64) -> Result<DemoSettings> {
    let mut base = DemoConfig::default();
    base.seed = seed;
    if let Some(v) = raw.n_measurements {
        base.n_measurements = v;
    }
    if let Some(v) = raw.noise_std {
        base.noise_std = v;
    }
    if let Some(v) = raw.query_points {
        base.query_points = v;
    }
    if let Some([lo, hi]) = raw.domain {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(config_err("demo.domain must be an increasing finite pair"));
        }
        base.domain = (lo, hi);
    }
    if let Some(v) = raw.sigma_f {
        base.hp.sigma_f = v;
    }
    if let Some(v) = raw.length_scale {
        base.hp.length_scale = v;
    }
    if let Some(v) = raw.sigma_r {
        base.hp.sigma_r = v;
    }
    base.hp = GpHyperParams::new(
        base.hp.sigma_f,
        base.hp.length_scale,
        base.hp.sigma_r,
        base.hp.alpha,
        base.hp.prior_mean,
    )
    .map_err(|e| config_err(e.to_string()))?;
    if base.n_measurements == 0 || base.query_points < 2 {
        return Err(config_err("demo needs measurements and at least 2 query points"));
    }
    if !(base.noise_std >= 0.0 && base.noise_std.is_finite()) {
        return Err(config_err("demo.noise_std must be non-negative"));
    }
    let distinct_inputs = raw.distinct_inputs.unwrap_or(10);
    let basis_sizes = raw.basis_sizes.clone().unwrap_or_else(|| vec![5, 10, 20]);
    if distinct_inputs == 0 || basis_sizes.iter().any(|&n| n < 2) {
        return Err(config_err("demo basis sizes must be at least 2"));
    }
    Ok(DemoSettings {
        base,
        distinct_inputs,
        basis_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(mode: Mode, text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(mode, text, &Overrides::default())
    }

    #[test]
    fn defaults_follow_mode() {
        let sim = load(Mode::Simulate, "").unwrap();
        assert_eq!(sim.tracker.hp.sigma_f, 2.0);
        assert_eq!(sim.tracker.process_noise.sigma_q, 1.0);
        assert!(!sim.tracker.use_smoother);
        assert_eq!(sim.baseline, None);
        let bench = load(Mode::Benchmark, "").unwrap();
        assert!(bench.tracker.use_smoother);
        assert_eq!(bench.baseline.as_deref(), Some("GP-EKF"));
        assert_eq!(bench.scenarios.len(), 5);
        assert_eq!(bench.n_runs, 100);
        assert_eq!(bench.tracker.lag, 10);
        assert_eq!(bench.snapshot_frames, vec![1, 50, 150, 230]);
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            seed: Some(3),
            runs: Some(2),
            lag: Some(4),
            smoother: true,
            ..Overrides::default()
        };
        let cfg =
            ExperimentConfig::from_toml(Mode::Simulate, "seed = 9\nruns = 5\n[tracker]\nlag = 1\n", &ov)
                .unwrap();
        assert_eq!((cfg.master_seed, cfg.n_runs, cfg.tracker.lag), (3, 2, 4));
        assert!(cfg.tracker.use_smoother);
        assert_eq!(cfg.demo.base.seed, 3);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "bogus = 1",
            "runs = 0",
            "baseline = \"KF\"",
            "mode = \"benchmark\"",
            "[tracker]\nbasis_size = 2",
            "[tracker]\nsigma_f = -1.0",
            "[scenario]\nshapes = [\"S9\"]",
            "[scenario]\nduration = 30.0",
            "[scenario]\npoints_per_scan = 5\npoisson_mean = 5.0",
            "snapshot_frames = [0]",
            "runs = \"many\"",
        ] {
            let err = load(Mode::Simulate, text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn shape_tables_define_new_shapes() {
        let cfg = load(
            Mode::Simulate,
            "[scenario]\nshapes = [\"blob\", \"S3\"]\n[scenario.shape_tables]\nblob = [1.0, 2.0, 1.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.scenarios[0].shape.id, "blob");
        assert_eq!(cfg.scenarios[1].shape.id, "S3");
    }

    #[test]
    fn real_data_needs_existing_scans() {
        assert!(load(Mode::RealData, "").is_err());
        let err = load(Mode::RealData, "[data]\nscans = \"/nonexistent/s.csv\"\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
