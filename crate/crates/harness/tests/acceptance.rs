//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gpett_core::demo::{
    demo_measurements, max_mean_deviation, query_grid, repeated_input_measurements, run_comparison,
    uniform_basis, DemoConfig,
};
use gpett_core::gp_model::{gp_regress, GpHyperParams, InputGrid};
use gpett_core::metrics::{mean_percentage_improvement, precision_recall_frame, rmse_series, MeasureKind};
use gpett_core::rgp::{rgp_init, rgp_step};
use gpett_core::sim::{generate_scans, generate_trajectory, Scenario, ShapeModel};
use gpett_core::tracker::{
    ekf_update_scan_with, initialize_from_scan, make_process_model, measurement_model,
    predict_with_model, InitConfig, PointLinearization, PointMeasurementModel, Scan, TrackState,
    Tracker, TrackerConfig, IDX_PSI, IDX_X, IDX_Y,
};
use gpett_core::Point;
use gpett_harness::config::{ExperimentConfig, Mode, Overrides};
use gpett_harness::formats::{parse_per_run, MeasureTable};
use gpett_harness::run_config;
use gpett_harness::table::Table;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Recursive GP with the basis at the measured inputs equals batch GP.
fn rgp_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in [11, 23, 47] {
        let cfg = DemoConfig {
            seed,
            ..DemoConfig::default()
        };
        assert_eq!(cfg.hp.alpha, 0.0);
        let (grid, ms) = repeated_input_measurements(&cfg, 10).map_err(|e| e.to_string())?;
        if ms.len() != 30 || grid.len() != 10 {
            return Err(format!("unexpected demo size {} / {}", ms.len(), grid.len()));
        }
        let mut state = rgp_init(&grid, &cfg.hp).map_err(|e| e.to_string())?;
        for m in &ms {
            state = rgp_step(&state, m).map_err(|e| e.to_string())?;
        }
        let xs: Vec<f64> = ms.iter().map(|m| m.input).collect();
        let ys: Vec<f64> = ms.iter().map(|m| m.value).collect();
        let batch = gp_regress(&xs, &ys, grid.points(), &cfg.hp, grid.kind()).map_err(|e| e.to_string())?;
        worst = worst
            .max((&state.belief.mean - &batch.mean).amax())
            .max((&state.belief.cov - &batch.cov).amax());
    }
    let t = start.elapsed();
    check(
        worst < 1e-8 && t < Duration::from_secs(1),
        format!("max |mean or cov diff| {worst:.2e} over 3 seeds in {:.3} s", secs(t)),
    )
}

/// More basis points approximate the batch posterior more closely.
fn rgp_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = DemoConfig::default();
    let ms = demo_measurements(&cfg).map_err(|e| e.to_string())?;
    let q = query_grid(&cfg).map_err(|e| e.to_string())?;
    if q.len() != 200 {
        return Err(format!("query grid has {} points", q.len()));
    }
    let mut dev = Vec::new();
    for n in [5, 10, 20] {
        let basis = uniform_basis(&cfg, n).map_err(|e| e.to_string())?;
        let steps = run_comparison(&ms, &basis, &cfg.hp, q.points()).map_err(|e| e.to_string())?;
        let last = steps.last().ok_or("no steps")?;
        dev.push(max_mean_deviation(&last.recursive, &last.batch));
    }
    let t = start.elapsed();
    check(
        dev[2] < dev[1] && dev[1] < dev[0] && t < Duration::from_secs(1),
        format!(
            "dev(5)={:.3e} dev(10)={:.3e} dev(20)={:.3e} in {:.3} s",
            dev[0],
            dev[1],
            dev[2],
            secs(t)
        ),
    )
}

/// At the newest scan the smoothed state is the filtered state.
fn filter_smoother_identity() -> Outcome {
    let mut scenario = Scenario::desk_scale(ShapeModel::library("S1").map_err(|e| e.to_string())?);
    scenario.duration = 4.9;
    let truth = generate_trajectory(&scenario).map_err(|e| e.to_string())?;
    let scans = generate_scans(&truth, &scenario, 5).map_err(|e| e.to_string())?;
    if scans.len() != 50 {
        return Err(format!("{} scans", scans.len()));
    }
    let mut cfg = TrackerConfig::simulation_defaults();
    cfg.use_smoother = true;
    cfg.lag = 10;
    let mut tracker = Tracker::new(cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for scan in &scans {
        let out = tracker.process_scan(scan).map_err(|e| e.to_string())?;
        let smoothed = tracker
            .window()
            .ok_or("no window")?
            .smoothed()
            .map_err(|e| e.to_string())?;
        let newest = smoothed.last().ok_or("empty window")?;
        worst = worst
            .max((&newest.mean - &out.filtered.mean).amax())
            .max((&newest.cov - &out.filtered.cov).amax());
    }
    check(worst < 1e-10, format!("max |smoothed - filtered| {worst:.2e} over 50 scans"))
}

fn random_state(rng: &mut ChaCha8Rng) -> TrackState {
    let hp = GpHyperParams::new(2.0, PI / 10.0, 0.8, 0.004, 1.0).unwrap();
    let basis = InputGrid::uniform_angles(20).unwrap();
    let dim = 25;
    let mut mean = DVector::zeros(dim);
    mean[0] = rng.random_range(-5.0..5.0);
    mean[1] = rng.random_range(-5.0..5.0);
    mean[2] = rng.random_range(-2.0..2.0);
    mean[3] = rng.random_range(-2.0..2.0);
    mean[IDX_PSI] = rng.random_range(-PI..PI);
    for i in 5..dim {
        mean[i] = rng.random_range(0.5..3.0);
    }
    TrackState::new(mean, DMatrix::identity(dim, dim), basis, hp, 0.0).unwrap()
}

/// Analytic measurement Jacobian against central differences.
fn jacobian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let state = random_state(&mut rng);
        let range = rng.random_range(0.5..4.0);
        let bearing = rng.random_range(0.0..TAU);
        let z: Point = [
            state.mean[IDX_X] + range * bearing.cos(),
            state.mean[IDX_Y] + range * bearing.sin(),
        ];
        let (_, analytic) = measurement_model(&state, &z).map_err(|e| e.to_string())?;
        let mut numeric = DMatrix::zeros(2, state.dim());
        for j in 0..state.dim() {
            let shifted = |delta: f64| {
                let mut s = state.clone();
                s.mean[j] += delta;
                measurement_model(&s, &z).map(|(h, _)| h)
            };
            let plus = shifted(step).map_err(|e| e.to_string())?;
            let minus = shifted(-step).map_err(|e| e.to_string())?;
            numeric.set_column(j, &((plus - minus) / (2.0 * step)));
        }
        let rel = (&analytic - &numeric).amax() / numeric.amax().max(1e-12);
        worst = worst.max(rel);
    }
    check(worst < 1e-5, format!("max relative error {worst:.2e} over 100 states"))
}

struct PositionOnly {
    noise_var: f64,
}

impl PointMeasurementModel for PositionOnly {
    fn linearize(&self, state: &TrackState, _z: &Point) -> gpett_core::Result<PointLinearization> {
        let mut jacobian = DMatrix::zeros(2, state.dim());
        jacobian[(0, IDX_X)] = 1.0;
        jacobian[(1, IDX_Y)] = 1.0;
        Ok(PointLinearization {
            predicted: Vector2::new(state.mean[IDX_X], state.mean[IDX_Y]),
            jacobian,
            noise: Matrix2::identity() * self.noise_var,
        })
    }
}

/// With a linear measurement model the tracker is an ordinary Kalman filter.
fn linear_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = TrackerConfig::simulation_defaults();
    let basis = cfg.basis().map_err(|e| e.to_string())?;
    let noise_var = 0.25;
    let model = PositionOnly { noise_var };
    let scans: Vec<Scan> = (0..20)
        .map(|k| {
            let t = 0.1 * k as f64;
            let pts = (0..rng.random_range(1..6))
                .map(|_| [3.0 * t + rng.random_range(-0.5..0.5), 1.0 - t + rng.random_range(-0.5..0.5)])
                .collect();
            Scan::new(t, pts).unwrap()
        })
        .collect();

    let mut state = initialize_from_scan(&scans[0], &basis, &cfg.hp, &InitConfig::default())
        .map_err(|e| e.to_string())?;
    let dim = state.dim();
    let (mut m, mut p) = (state.mean.clone(), state.cov.clone());
    let mut worst: f64 = 0.0;
    for (k, scan) in scans.iter().enumerate() {
        let predicted = if k == 0 {
            state.clone()
        } else {
            let dt = scan.time - state.time;
            let (f, q) = make_process_model(dt, &cfg.process_noise, &cfg.hp, &basis)
                .map_err(|e| e.to_string())?;
            let offset = DVector::from_fn(dim, |i, _| {
                if i >= 5 {
                    (1.0 - f[(i, i)]) * cfg.hp.prior_mean
                } else {
                    0.0
                }
            });
            m = &f * &m + offset;
            p = &f * &p * f.transpose() + &q;
            predict_with_model(&state, dt, &f, &q)
        };
        state = ekf_update_scan_with(&predicted, scan, &model).map_err(|e| e.to_string())?;

        let rows = 2 * scan.points.len();
        let mut h = DMatrix::zeros(rows, dim);
        let mut z = DVector::zeros(rows);
        for (i, pt) in scan.points.iter().enumerate() {
            h[(2 * i, 0)] = 1.0;
            h[(2 * i + 1, 1)] = 1.0;
            z[2 * i] = pt[0];
            z[2 * i + 1] = pt[1];
        }
        let s = &h * &p * h.transpose() + DMatrix::identity(rows, rows) * noise_var;
        let gain = &p * h.transpose() * s.try_inverse().ok_or("singular S")?;
        m = &m + &gain * (z - &h * &m);
        p = (DMatrix::identity(dim, dim) - &gain * &h) * &p;
        worst = worst
            .max((&state.mean - &m).amax())
            .max((&state.cov - &p).amax());
    }
    check(worst < 1e-10, format!("max |tracker - Kalman filter| {worst:.2e} over 20 steps"))
}

struct DeskRun {
    elapsed: Duration,
    measures: MeasureTable,
    per_run: Vec<gpett_harness::formats::PerRunRow>,
}

fn desk_scale_benchmark(out: &Path) -> Result<DeskRun, String> {
    let text = r#"
seed = 2019
runs = 20
snapshot_frames = []
[scenario]
shapes = ["circle", "ellipse"]
noise_std = 0.1
points_per_scan = 20
[tracker]
sigma_q = 1.0
sigma_q_psi = 0.0001
sigma_f = 2.0
sigma_r = 0.8
length_scale = 0.3141592653589793
alpha = 0.004
lag = 10
use_smoother = true
"#;
    let ov = Overrides {
        out: Some(out.to_path_buf()),
        ..Overrides::default()
    };
    let cfg = ExperimentConfig::from_toml(Mode::Benchmark, text, &ov).map_err(|e| e.to_string())?;
    let start = Instant::now();
    run_config(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let read = |name: &str| Table::read(&out.join(name)).map_err(|e| e.to_string());
    Ok(DeskRun {
        elapsed,
        measures: MeasureTable::parse(&read("measures.csv")?).map_err(|e| e.to_string())?,
        per_run: parse_per_run(&read("per_run.csv")?).map_err(|e| e.to_string())?,
    })
}

/// Precision, recall and centre RMSE bands on the desk-scale scenarios.
fn desk_scale_quality(run: &DeskRun) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = run.elapsed < Duration::from_secs(120);
    for (si, scenario) in run.measures.scenarios.iter().enumerate() {
        for method in ["GP-EKF", "GP-RTSS"] {
            let get = |label: &str| {
                run.measures
                    .rows
                    .iter()
                    .find(|r| r.method == method && r.measure.label() == label)
                    .map(|r| r.values[si])
                    .unwrap_or(f64::NAN)
            };
            let (p, r, x, y) = (get("P"), get("R"), get("rmse_x"), get("rmse_y"));
            ok &= p >= 0.90 && r >= 0.90 && x <= 0.3 && y <= 0.3;
            lines.push(format!(
                "{scenario}/{method} P={p:.3} R={r:.3} rmse_x={x:.3} rmse_y={y:.3}"
            ));
        }
    }
    ok &= run.measures.scenarios.len() == 2;
    check(ok, format!("{}; {:.1} s", lines.join("; "), secs(run.elapsed)))
}

/// The smoother's velocity error is no larger than the filter's in most runs.
fn smoother_benefit(run: &DeskRun) -> Outcome {
    let mut wins = 0;
    let mut total = 0;
    let mut lines = Vec::new();
    for scenario in &run.measures.scenarios {
        let rows: Vec<_> = run.per_run.iter().filter(|r| &r.scenario == scenario).collect();
        let mut scenario_wins = 0;
        let mut scenario_total = 0;
        for filt in rows.iter().filter(|r| r.method == "GP-EKF") {
            let smooth = rows
                .iter()
                .find(|r| r.method == "GP-RTSS" && r.run == filt.run)
                .ok_or("missing smoother row")?;
            let (Ok(f), Ok(s)) = (&filt.outcome, &smooth.outcome) else {
                scenario_total += 1;
                continue;
            };
            let vel = |x: f64, y: f64| x.hypot(y);
            if vel(s.rmse_vx, s.rmse_vy) <= vel(f.rmse_vx, f.rmse_vy) {
                scenario_wins += 1;
            }
            scenario_total += 1;
        }
        lines.push(format!("{scenario} {scenario_wins}/{scenario_total}"));
        wins += scenario_wins;
        total += scenario_total;
    }
    let share = wins as f64 / total.max(1) as f64;
    check(
        total == 40 && share >= 0.8,
        format!("smoother velocity RMSE <= filter in {wins}/{total} runs ({})", lines.join(", ")),
    )
}

fn square(x0: f64, y0: f64, w: f64, h: f64) -> Vec<Point> {
    vec![[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]
}

/// Metric oracles with analytic answers.
fn metric_oracles() -> Outcome {
    let unit = square(0.0, 0.0, 1.0, 1.0);
    let (p1, r1) = precision_recall_frame(&unit, &unit, 100.0).map_err(|e| e.to_string())?;
    let big = square(0.0, 0.0, 2.0, 2.0);
    let inner = square(0.2, 0.375, 1.6, 1.25);
    let (p2, r2) = precision_recall_frame(&inner, &big, 100.0).map_err(|e| e.to_string())?;
    let rmse = rmse_series(&[3.0, 4.0]).map_err(|e| e.to_string())?;
    let mpi = mean_percentage_improvement(0.1010, 0.27, MeasureKind::ErrorLike).map_err(|e| e.to_string())?;
    let near = |v: f64, target: f64, tol: f64| (v - target).abs() <= tol;
    let ok = near(p1, 1.0, 0.01)
        && near(r1, 1.0, 0.01)
        && near(p2, 1.0, 0.01)
        && near(r2, 0.5, 0.01 * 0.5)
        && near(rmse, 12.5f64.sqrt(), 1e-9)
        && near(rmse, 3.53553, 5e-6)
        && near(mpi, -167.3, 0.5);
    check(
        ok,
        format!(
            "identical P={p1:.4} R={r1:.4}; half P={p2:.4} R={r2:.4}; rmse={rmse:.9}; mpi={mpi:.2}"
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Two benchmark invocations with one seed write identical CSV bytes.
fn benchmark_determinism(work: &Path) -> Outcome {
    let cfg = work.join("bench.toml");
    fs::write(
        &cfg,
        "runs = 4\n[scenario]\nshapes = [\"S1\", \"S4\"]\nwaypoints = [[0.0, 0.0, 0.0], [4.0, 8.0, 2.0]]\nduration = 4.0\n",
    )
    .map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    for (i, workers) in ["1", "3"].iter().enumerate() {
        let out = work.join(format!("bench{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_gpett"))
            .args(["benchmark", "--config"])
            .arg(&cfg)
            .args(["--seed", "77", "--workers", workers, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        dirs.push(csv_files(&out));
    }
    let names: Vec<&str> = dirs[0].iter().map(|(n, _)| n.as_str()).collect();
    check(
        dirs[0] == dirs[1] && names.len() == 3,
        format!("{} CSV files byte-identical across runs with 1 and 3 workers", names.len()),
    )
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let desk = desk_scale_benchmark(&work.path().join("desk"));

    let results: Vec<(&str, Outcome)> = vec![
        ("1 rgp-exactness", rgp_exactness()),
        ("2 rgp-convergence", rgp_convergence()),
        ("3 filter-smoother-identity", filter_smoother_identity()),
        ("4 jacobian-correctness", jacobian_correctness()),
        ("5 linear-reduction", linear_reduction()),
        (
            "6 desk-scale-quality",
            desk.as_ref().map_err(Clone::clone).and_then(desk_scale_quality),
        ),
        ("7 metric-oracles", metric_oracles()),
        ("8 benchmark-determinism", benchmark_determinism(work.path())),
        (
            "9 smoother-velocity-benefit",
            desk.as_ref().map_err(Clone::clone).and_then(smoother_benefit),
        ),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
