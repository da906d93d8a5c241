//! Experiment execution for every mode and emission of its artifacts.

use std::path::{Path, PathBuf};

use gpett_core::demo::{
    demo_measurements, query_grid, repeated_input_measurements, run_comparison, uniform_basis,
    DemoStep,
};
use gpett_core::gp_model::BasisProjector;
use gpett_core::metrics::{evaluate_track, summarize_run, Measure, MethodSummary, MetricsReport, MpiRow, RunSummary};
use gpett_core::sim::{generate_trajectory, simulate_run, GroundTruthFrame, Scenario};
use gpett_core::tracker::{contour_from_extent, track_scans, Scan, TrackEstimate, TrackRun};
use gpett_core::Point;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode, FILTER_METHOD, SMOOTHER_METHOD};
use crate::error::{HarnessError, Result};
use crate::formats::{
    truth_rows_of, write_contours, write_demo, write_demo_summary, write_per_run, write_scans,
    write_states, write_truth, DemoRow, DemoSummaryRow, MeasureTable, PerRunRow,
};
use crate::ingest::ingest_real_scans;
use crate::svg::{render_snapshot, Outline};

/// Files written by a run, plus remarks for the user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl Artifacts {
    fn path(&mut self, out: &Path, name: &str) -> PathBuf {
        let p = out.join(name);
        self.files.push(p.clone());
        p
    }
}

/// Runs the configured experiment and writes its artifacts under `out_dir`.
///
/// When some Monte Carlo runs fail, the remaining artifacts are still written
/// (failed runs excluded from aggregates) before the failure is returned.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Artifacts> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let mut art = Artifacts::default();
    let failure = match cfg.mode {
        Mode::RegressDemo => regress_demo(cfg, &mut art).map(|_| None)?,
        Mode::Simulate => simulate(cfg, &mut art)?,
        Mode::Benchmark => benchmark(cfg, &mut art)?,
        Mode::RealData => real_data(cfg, &mut art)?,
        Mode::Track => track(cfg, &mut art)?,
    };
    match failure {
        Some(err) => Err(err),
        None => Ok(art),
    }
}

fn demo_rows(steps: &[DemoStep], query: &[f64]) -> Vec<DemoRow> {
    steps
        .iter()
        .flat_map(|s| {
            let (rs, bs) = (s.recursive.stddev(), s.batch.stddev());
            query.iter().enumerate().map(move |(i, &x)| DemoRow {
                step: s.step as u64,
                query_input: x,
                mean: s.recursive.mean[i],
                stddev: rs[i],
                oracle_mean: s.batch.mean[i],
                oracle_std: bs[i],
            })
        })
        .collect()
}

fn final_deviation(case: &str, basis_size: usize, steps: &[DemoStep]) -> DemoSummaryRow {
    let (max_mean_dev, max_std_dev) = steps.last().map_or((0.0, 0.0), |s| {
        (
            (&s.recursive.mean - &s.batch.mean).amax(),
            (s.recursive.stddev() - s.batch.stddev()).amax(),
        )
    });
    DemoSummaryRow {
        case: case.to_string(),
        basis_size: basis_size as u64,
        max_mean_dev,
        max_std_dev,
    }
}

fn regress_demo(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let demo = &cfg.demo.base;
    let measurements = demo_measurements(demo)?;
    let query = query_grid(demo)?;
    let mut summary = Vec::new();
    for &n in &cfg.demo.basis_sizes {
        let basis = uniform_basis(demo, n)?;
        let steps = run_comparison(&measurements, &basis, &demo.hp, query.points())?;
        write_demo(
            &art.path(&cfg.out_dir, &format!("regress_demo_basis{n}.csv")),
            &demo_rows(&steps, query.points()),
        )?;
        summary.push(final_deviation("uniform", n, &steps));
    }
    // basis equal to the measured inputs: recursion reproduces batch GP
    let (grid, repeated) = repeated_input_measurements(demo, cfg.demo.distinct_inputs)?;
    let steps = run_comparison(&repeated, &grid, &demo.hp, grid.points())?;
    write_demo(
        &art.path(&cfg.out_dir, "regress_demo_subset.csv"),
        &demo_rows(&steps, grid.points()),
    )?;
    summary.push(final_deviation("subset", grid.len(), &steps));
    write_demo_summary(&art.path(&cfg.out_dir, "regress_demo_summary.csv"), &summary)
}

/// Estimates of every reported method for one run, in method order.
fn method_estimates<'a>(run: &'a TrackRun) -> Vec<&'a [TrackEstimate]> {
    let mut out = vec![run.filtered.as_slice()];
    if let Some(s) = &run.smoothed {
        out.push(s.as_slice());
    }
    out
}

fn evaluate_methods(
    cfg: &ExperimentConfig,
    projector: &BasisProjector,
    run: &TrackRun,
    truth: &[GroundTruthFrame],
) -> gpett_core::Result<Vec<RunSummary>> {
    method_estimates(run)
        .into_iter()
        .map(|est| summarize_run(&evaluate_track(projector, est, truth, cfg.resolution)?))
        .collect()
}

fn frame_ids(n: usize) -> Vec<u64> {
    (1..=n as u64).collect()
}

fn write_tracks(
    out: &Path,
    dir: &str,
    ids: &[u64],
    run: &TrackRun,
    art: &mut Artifacts,
) -> Result<()> {
    write_states(&art.path(out, &format!("{dir}states_filtered.csv")), ids, &run.filtered)?;
    if let Some(s) = &run.smoothed {
        write_states(&art.path(out, &format!("{dir}states_smoothed.csv")), ids, s)?;
    }
    Ok(())
}

fn estimate_contour(projector: &BasisProjector, est: &TrackEstimate) -> gpett_core::Result<Vec<Point>> {
    contour_from_extent(
        projector,
        est.center,
        est.psi,
        &est.extent,
        gpett_core::metrics::EVAL_CONTOUR_VERTICES,
    )
}

fn write_snapshots(
    cfg: &ExperimentConfig,
    dir: &str,
    projector: &BasisProjector,
    scans: &[Scan],
    run: &TrackRun,
    truth: Option<&[GroundTruthFrame]>,
    art: &mut Artifacts,
) -> Result<()> {
    let colors = ["#1f5fbf", "#d9730d"];
    let methods = [FILTER_METHOD, SMOOTHER_METHOD];
    for &frame in &cfg.snapshot_frames {
        if frame > scans.len() {
            art.notes.push(format!(
                "snapshot frame {frame} skipped: only {} frames",
                scans.len()
            ));
            continue;
        }
        let k = frame - 1;
        let contours: Vec<Vec<Point>> = method_estimates(run)
            .iter()
            .map(|est| estimate_contour(projector, &est[k]))
            .collect::<gpett_core::Result<_>>()?;
        let mut outlines: Vec<Outline> = Vec::new();
        if let Some(t) = truth {
            outlines.push(Outline {
                label: "truth",
                points: &t[k].contour,
                color: "#2a9d3a",
            });
        }
        for (i, c) in contours.iter().enumerate() {
            outlines.push(Outline {
                label: methods[i],
                points: c,
                color: colors[i],
            });
        }
        let svg = render_snapshot(
            &format!("{dir}frame {frame} t={}", scans[k].time),
            &outlines,
            &scans[k].points,
        );
        let path = art.path(&cfg.out_dir, &format!("{dir}snapshot_frame{frame:03}.svg"));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        std::fs::write(&path, svg).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

/// Writes the measures table and, with a baseline, the improvement table.
fn write_report(
    cfg: &ExperimentConfig,
    scenarios: Vec<String>,
    cells: Vec<Vec<MethodSummary>>,
    art: &mut Artifacts,
) -> Result<()> {
    let methods: Vec<String> = cfg.methods().iter().map(|m| m.to_string()).collect();
    let report = MetricsReport::new(scenarios.clone(), methods.clone(), cells, cfg.baseline.clone())?;
    let mut rows = Vec::new();
    for measure in Measure::ALL {
        for (mi, method) in methods.iter().enumerate() {
            rows.push(MpiRow {
                measure,
                method: method.clone(),
                values: (0..scenarios.len()).map(|s| report.value(measure, mi, s)).collect(),
            });
        }
    }
    MeasureTable {
        scenarios: scenarios.clone(),
        rows,
    }
    .write(&art.path(&cfg.out_dir, "measures.csv"))?;
    if let Some(rows) = report.mpi_table()? {
        MeasureTable { scenarios, rows }.write(&art.path(&cfg.out_dir, "mpi.csv"))?;
    }
    Ok(())
}

fn scenario_dir(s: &Scenario) -> String {
    format!("{}/", s.shape.id)
}

fn simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<HarnessError>> {
    let projector = BasisProjector::new(&cfg.tracker.basis()?, &cfg.tracker.hp)?;
    let mut cells: Vec<Vec<MethodSummary>> = vec![Vec::new(); cfg.methods().len()];
    let mut names = Vec::new();
    for sc in &cfg.scenarios {
        let dir = scenario_dir(sc);
        let truth = generate_trajectory(sc)?;
        let ids = frame_ids(truth.len());
        let record = simulate_run(sc, &truth, &cfg.tracker, cfg.master_seed, 0)?;
        write_truth(&art.path(&cfg.out_dir, &format!("{dir}truth.csv")), &truth_rows_of(&ids, &truth))?;
        let contours: Vec<&[Point]> = truth.iter().map(|f| f.contour.as_slice()).collect();
        write_contours(
            &art.path(&cfg.out_dir, &format!("{dir}truth_contours.csv")),
            &ids,
            &contours,
        )?;
        write_scans(&art.path(&cfg.out_dir, &format!("{dir}scans.csv")), &ids, &record.scans)?;
        let run = match record.outcome {
            Ok(run) => run,
            Err(first) => {
                return Ok(Some(HarnessError::RunsFailed {
                    scenario: sc.shape.id.clone(),
                    indices: vec![0],
                    first,
                }))
            }
        };
        write_tracks(&cfg.out_dir, &dir, &ids, &run, art)?;
        write_snapshots(cfg, &dir, &projector, &record.scans, &run, Some(&truth), art)?;
        let summaries = match evaluate_methods(cfg, &projector, &run, &truth) {
            Ok(s) => s,
            Err(e) => {
                return Ok(Some(HarnessError::RunsFailed {
                    scenario: sc.shape.id.clone(),
                    indices: vec![0],
                    first: e.to_string(),
                }))
            }
        };
        for (mi, s) in summaries.into_iter().enumerate() {
            cells[mi].push(MethodSummary::from_runs(vec![s], 0)?);
        }
        names.push(sc.shape.id.clone());
    }
    write_report(cfg, names, cells, art)?;
    Ok(None)
}

struct RunOutcome {
    index: usize,
    seed: u64,
    summaries: std::result::Result<Vec<RunSummary>, String>,
    /// Scans and estimates of the first run, kept for snapshots.
    detail: Option<(Vec<Scan>, TrackRun)>,
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

fn monte_carlo(
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    sc: &Scenario,
    truth: &[GroundTruthFrame],
    projector: &BasisProjector,
) -> Result<Vec<RunOutcome>> {
    let outcomes: Vec<gpett_core::Result<RunOutcome>> = pool.install(|| {
        // indexed collect keeps run order independent of scheduling
        (0..cfg.n_runs)
            .into_par_iter()
            .map(|i| {
                let rec = simulate_run(sc, truth, &cfg.tracker, cfg.master_seed, i)?;
                let summaries = rec.outcome.as_ref().map_err(Clone::clone).and_then(|run| {
                    evaluate_methods(cfg, projector, run, truth).map_err(|e| e.to_string())
                });
                let detail = match (i, rec.outcome) {
                    (0, Ok(run)) => Some((rec.scans, run)),
                    _ => None,
                };
                Ok(RunOutcome {
                    index: rec.index,
                    seed: rec.seed,
                    summaries,
                    detail,
                })
            })
            .collect()
    });
    Ok(outcomes.into_iter().collect::<gpett_core::Result<_>>()?)
}

fn benchmark(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<HarnessError>> {
    let pool = worker_pool(cfg.workers)?;
    let projector = BasisProjector::new(&cfg.tracker.basis()?, &cfg.tracker.hp)?;
    let methods = cfg.methods();
    let mut cells: Vec<Vec<MethodSummary>> = vec![Vec::new(); methods.len()];
    let mut per_run = Vec::new();
    let mut failure = None;
    let mut names = Vec::new();
    for sc in &cfg.scenarios {
        let dir = scenario_dir(sc);
        let truth = generate_trajectory(sc)?;
        let outcomes = monte_carlo(cfg, &pool, sc, &truth, &projector)?;

        let mut ok: Vec<Vec<RunSummary>> = vec![Vec::new(); methods.len()];
        let mut failed = Vec::new();
        for o in &outcomes {
            for (mi, method) in methods.iter().enumerate() {
                let outcome = match &o.summaries {
                    Ok(s) => {
                        ok[mi].push(s[mi]);
                        Ok(s[mi])
                    }
                    Err(msg) => Err(msg.clone()),
                };
                per_run.push(PerRunRow {
                    scenario: sc.shape.id.clone(),
                    run: o.index as u64,
                    seed: o.seed,
                    method: method.to_string(),
                    outcome,
                });
            }
            if let Err(msg) = &o.summaries {
                failed.push((o.index, msg.clone()));
            }
        }
        if !failed.is_empty() {
            art.notes.push(format!(
                "scenario {}: {} of {} runs failed and are excluded",
                sc.shape.id,
                failed.len(),
                outcomes.len()
            ));
            if failure.is_none() {
                failure = Some(HarnessError::RunsFailed {
                    scenario: sc.shape.id.clone(),
                    indices: failed.iter().map(|f| f.0).collect(),
                    first: failed[0].1.clone(),
                });
            }
        }
        if failed.len() == outcomes.len() {
            continue;
        }
        for (mi, runs) in ok.into_iter().enumerate() {
            cells[mi].push(MethodSummary::from_runs(runs, failed.len())?);
        }
        if let Some((scans, run)) = outcomes.into_iter().find_map(|o| o.detail) {
            write_snapshots(cfg, &dir, &projector, &scans, &run, Some(&truth), art)?;
        }
        names.push(sc.shape.id.clone());
    }
    write_per_run(&art.path(&cfg.out_dir, "per_run.csv"), &per_run)?;
    write_report(cfg, names, cells, art)?;
    Ok(failure)
}

fn scan_inputs(cfg: &ExperimentConfig) -> Result<crate::ingest::RealScanSet> {
    let scans = cfg
        .data
        .scans
        .as_deref()
        .ok_or_else(|| HarnessError::Config("a scan file is required".into()))?;
    ingest_real_scans(scans, cfg.data.truth.as_deref(), cfg.data.contours.as_deref())
}

fn track_or_fail(cfg: &ExperimentConfig, scans: &[Scan]) -> std::result::Result<TrackRun, HarnessError> {
    track_scans(&cfg.tracker, scans).map_err(|e| HarnessError::RunsFailed {
        scenario: "data".into(),
        indices: vec![0],
        first: e.to_string(),
    })
}

fn track(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<HarnessError>> {
    let data = scan_inputs(cfg)?;
    let run = match track_or_fail(cfg, &data.scans) {
        Ok(r) => r,
        Err(e) => return Ok(Some(e)),
    };
    write_tracks(&cfg.out_dir, "", &data.frame_ids, &run, art)?;
    Ok(None)
}

fn real_data(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<HarnessError>> {
    let data = scan_inputs(cfg)?;
    let run = match track_or_fail(cfg, &data.scans) {
        Ok(r) => r,
        Err(e) => return Ok(Some(e)),
    };
    let projector = BasisProjector::new(&cfg.tracker.basis()?, &cfg.tracker.hp)?;
    write_tracks(&cfg.out_dir, "", &data.frame_ids, &run, art)?;
    write_snapshots(cfg, "", &projector, &data.scans, &run, data.truth.as_deref(), art)?;
    match &data.truth {
        Some(truth) => {
            let summaries = match evaluate_methods(cfg, &projector, &run, truth) {
                Ok(s) => s,
                Err(e) => {
                    return Ok(Some(HarnessError::RunsFailed {
                        scenario: "data".into(),
                        indices: vec![0],
                        first: e.to_string(),
                    }))
                }
            };
            let cells = summaries
                .into_iter()
                .map(|s| Ok(vec![MethodSummary::from_runs(vec![s], 0)?]))
                .collect::<Result<_>>()?;
            write_report(cfg, vec!["data".into()], cells, art)?;
        }
        None => art
            .notes
            .push("no ground truth given: metrics limited to snapshots (no RMSE, P or R)".into()),
    }
    Ok(None)
}
