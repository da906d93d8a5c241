//! Typed CSV artifacts. Every writer has a matching reader, and writing what
//! a reader returns reproduces the file byte for byte.

use std::path::Path;

use gpett_core::metrics::{Measure, MpiRow, RunSummary};
use gpett_core::sim::GroundTruthFrame;
use gpett_core::tracker::{Scan, TrackEstimate};
use gpett_core::Point;

use crate::error::{HarnessError, Result};
use crate::table::{self, num, strings, Table};

/// Scan points, one row per point: `frame_id, time_s, x_m, y_m`.
pub fn scans_rows(ids: &[u64], scans: &[Scan]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(["frame_id", "time_s", "x_m", "y_m"]);
    let rows = ids
        .iter()
        .zip(scans)
        .flat_map(|(id, scan)| {
            scan.points
                .iter()
                .map(move |p| vec![id.to_string(), num(scan.time), num(p[0]), num(p[1])])
        })
        .collect();
    (header, rows)
}

pub fn write_scans(path: &Path, ids: &[u64], scans: &[Scan]) -> Result<()> {
    let (h, r) = scans_rows(ids, scans);
    table::write(path, &h, &r)
}

/// Groups point rows into scans. Rows of one frame must be contiguous and
/// share its time; frame times must increase strictly.
pub fn parse_scans(t: &Table) -> Result<(Vec<u64>, Vec<Scan>)> {
    let c = t.require(&["frame_id", "time_s", "x_m", "y_m"])?;
    let mut ids: Vec<u64> = Vec::new();
    let mut groups: Vec<(f64, Vec<Point>)> = Vec::new();
    for rec in &t.records {
        let id = t.u64(rec, c[0])?;
        let time = t.finite(rec, c[1])?;
        let p = [t.finite(rec, c[2])?, t.finite(rec, c[3])?];
        if ids.last() == Some(&id) {
            let group = groups.last_mut().expect("ids and groups grow together");
            if time != group.0 {
                return Err(HarnessError::validation(
                    &t.source,
                    format!(
                        "line {}: frame {id} has time {time} but started at {}",
                        rec.line, group.0
                    ),
                ));
            }
            group.1.push(p);
            continue;
        }
        if ids.contains(&id) {
            return Err(HarnessError::validation(
                &t.source,
                format!("line {}: frame {id} reappears after other frames", rec.line),
            ));
        }
        if let Some((prev, _)) = groups.last() {
            if time <= *prev {
                return Err(HarnessError::validation(
                    &t.source,
                    format!("line {}: frame {id} time {time} does not follow {prev}", rec.line),
                ));
            }
        }
        ids.push(id);
        groups.push((time, vec![p]));
    }
    if ids.is_empty() {
        return Err(HarnessError::validation(&t.source, "no scan rows"));
    }
    let scans = groups
        .into_iter()
        .map(|(time, points)| Scan::new(time, points))
        .collect::<gpett_core::Result<Vec<_>>>()?;
    Ok((ids, scans))
}

/// Kinematic ground truth, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub frame_id: u64,
    pub time: f64,
    pub center: Point,
    pub velocity: Point,
    pub psi: f64,
}

const TRUTH_COLUMNS: [&str; 7] = ["frame_id", "time_s", "cx", "cy", "vx", "vy", "psi"];

pub fn truth_rows_of(ids: &[u64], frames: &[GroundTruthFrame]) -> Vec<TruthRow> {
    ids.iter()
        .zip(frames)
        .map(|(&frame_id, f)| TruthRow {
            frame_id,
            time: f.time,
            center: f.center,
            velocity: f.velocity,
            psi: f.psi,
        })
        .collect()
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.frame_id.to_string(),
                num(r.time),
                num(r.center[0]),
                num(r.center[1]),
                num(r.velocity[0]),
                num(r.velocity[1]),
                num(r.psi),
            ]
        })
        .collect();
    table::write(path, &strings(TRUTH_COLUMNS), &body)
}

pub fn parse_truth(t: &Table) -> Result<Vec<TruthRow>> {
    let c = t.require(&TRUTH_COLUMNS)?;
    let mut rows: Vec<TruthRow> = Vec::with_capacity(t.records.len());
    for rec in &t.records {
        let row = TruthRow {
            frame_id: t.u64(rec, c[0])?,
            time: t.finite(rec, c[1])?,
            center: [t.finite(rec, c[2])?, t.finite(rec, c[3])?],
            velocity: [t.finite(rec, c[4])?, t.finite(rec, c[5])?],
            psi: t.finite(rec, c[6])?,
        };
        if rows.iter().any(|r| r.frame_id == row.frame_id) {
            return Err(HarnessError::validation(
                &t.source,
                format!("line {}: duplicate frame {}", rec.line, row.frame_id),
            ));
        }
        if let Some(prev) = rows.last() {
            if row.time <= prev.time {
                return Err(HarnessError::validation(
                    &t.source,
                    format!("line {}: time {} does not follow {}", rec.line, row.time, prev.time),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Contour vertices, one row per vertex: `frame_id, x_m, y_m`.
pub fn write_contours(path: &Path, ids: &[u64], contours: &[&[Point]]) -> Result<()> {
    let body: Vec<Vec<String>> = ids
        .iter()
        .zip(contours)
        .flat_map(|(id, c)| c.iter().map(move |p| vec![id.to_string(), num(p[0]), num(p[1])]))
        .collect();
    table::write(path, &strings(["frame_id", "x_m", "y_m"]), &body)
}

pub fn parse_contours(t: &Table) -> Result<(Vec<u64>, Vec<Vec<Point>>)> {
    let c = t.require(&["frame_id", "x_m", "y_m"])?;
    let mut ids: Vec<u64> = Vec::new();
    let mut contours: Vec<Vec<Point>> = Vec::new();
    for rec in &t.records {
        let id = t.u64(rec, c[0])?;
        let p = [t.finite(rec, c[1])?, t.finite(rec, c[2])?];
        if ids.last() == Some(&id) {
            contours.last_mut().expect("ids and contours grow together").push(p);
        } else if ids.contains(&id) {
            return Err(HarnessError::validation(
                &t.source,
                format!("line {}: contour of frame {id} is not contiguous", rec.line),
            ));
        } else {
            ids.push(id);
            contours.push(vec![p]);
        }
    }
    if let Some((id, _)) = ids.iter().zip(&contours).find(|(_, c)| c.len() < 3) {
        return Err(HarnessError::validation(
            &t.source,
            format!("contour of frame {id} has fewer than 3 vertices"),
        ));
    }
    Ok((ids, contours))
}

/// Per-frame track estimates: kinematics, orientation and extent radii.
pub fn write_states(path: &Path, ids: &[u64], states: &[TrackEstimate]) -> Result<()> {
    let n = states.first().map_or(0, |s| s.extent.len());
    let mut header = strings(["frame_id", "time_s", "x", "y", "vx", "vy", "psi"]);
    header.extend((0..n).map(|i| format!("f_{i}")));
    let body: Vec<Vec<String>> = ids
        .iter()
        .zip(states)
        .map(|(id, s)| {
            let mut row = vec![
                id.to_string(),
                num(s.time),
                num(s.center[0]),
                num(s.center[1]),
                num(s.velocity[0]),
                num(s.velocity[1]),
                num(s.psi),
            ];
            row.extend(s.extent.iter().map(|&f| num(f)));
            row
        })
        .collect();
    table::write(path, &header, &body)
}

pub fn parse_states(t: &Table) -> Result<(Vec<u64>, Vec<TrackEstimate>)> {
    let c = t.require(&["frame_id", "time_s", "x", "y", "vx", "vy", "psi"])?;
    let mut extent_cols = Vec::new();
    while let Some(col) = t.header.iter().position(|h| *h == format!("f_{}", extent_cols.len())) {
        extent_cols.push(col);
    }
    let mut ids = Vec::new();
    let mut states = Vec::new();
    for rec in &t.records {
        ids.push(t.u64(rec, c[0])?);
        states.push(TrackEstimate {
            time: t.f64(rec, c[1])?,
            center: [t.f64(rec, c[2])?, t.f64(rec, c[3])?],
            velocity: [t.f64(rec, c[4])?, t.f64(rec, c[5])?],
            psi: t.f64(rec, c[6])?,
            extent: extent_cols
                .iter()
                .map(|&col| t.f64(rec, col))
                .collect::<Result<_>>()?,
        });
    }
    Ok((ids, states))
}

/// Measure × method rows with one value per scenario column. Used for both
/// the measures table and the improvement table.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    pub scenarios: Vec<String>,
    pub rows: Vec<MpiRow>,
}

impl MeasureTable {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut header = strings(["measure", "method"]);
        header.extend(self.scenarios.iter().cloned());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.measure.label().to_string(), r.method.clone()];
                row.extend(r.values.iter().map(|&v| num(v)));
                row
            })
            .collect();
        table::write(path, &header, &body)
    }

    pub fn parse(t: &Table) -> Result<MeasureTable> {
        let c = t.require(&["measure", "method"])?;
        if c != [0, 1] {
            return Err(HarnessError::Parse {
                path: t.source.clone(),
                line: t.header_line,
                message: "measure and method must be the first two columns".into(),
            });
        }
        let scenarios = t.header[2..].to_vec();
        let rows = t
            .records
            .iter()
            .map(|rec| {
                let label = t.text(rec, 0);
                let measure = Measure::from_label(label)
                    .ok_or_else(|| t.error_at(rec, format!("unknown measure {label:?}")))?;
                Ok(MpiRow {
                    measure,
                    method: t.text(rec, 1).to_string(),
                    values: (2..t.header.len())
                        .map(|col| t.f64(rec, col))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(MeasureTable { scenarios, rows })
    }
}

/// Outcome of one method on one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerRunRow {
    pub scenario: String,
    pub run: u64,
    pub seed: u64,
    pub method: String,
    /// `Err` holds the failure message.
    pub outcome: std::result::Result<RunSummary, String>,
}

const PER_RUN_COLUMNS: [&str; 12] = [
    "scenario", "run", "seed", "method", "status", "rmse_x", "rmse_y", "rmse_vx", "rmse_vy", "P",
    "R", "error",
];

pub fn write_per_run(path: &Path, rows: &[PerRunRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.scenario.clone(),
                r.run.to_string(),
                r.seed.to_string(),
                r.method.clone(),
            ];
            match &r.outcome {
                Ok(s) => {
                    row.push("ok".into());
                    row.extend(Measure::ALL.iter().map(|&m| num(s.get(m))));
                    row.push(String::new());
                }
                Err(msg) => {
                    row.push("failed".into());
                    row.extend(Measure::ALL.iter().map(|_| String::new()));
                    row.push(msg.clone());
                }
            }
            row
        })
        .collect();
    table::write(path, &strings(PER_RUN_COLUMNS), &body)
}

pub fn parse_per_run(t: &Table) -> Result<Vec<PerRunRow>> {
    let c = t.require(&PER_RUN_COLUMNS)?;
    t.records
        .iter()
        .map(|rec| {
            let outcome = match t.text(rec, c[4]) {
                "ok" => {
                    let v = |i: usize| t.f64(rec, c[5 + i]);
                    Ok(RunSummary {
                        rmse_x: v(0)?,
                        rmse_y: v(1)?,
                        rmse_vx: v(2)?,
                        rmse_vy: v(3)?,
                        mean_precision: v(4)?,
                        mean_recall: v(5)?,
                    })
                }
                "failed" => Err(t.text(rec, c[11]).to_string()),
                other => return Err(t.error_at(rec, format!("unknown status {other:?}"))),
            };
            Ok(PerRunRow {
                scenario: t.text(rec, c[0]).to_string(),
                run: t.u64(rec, c[1])?,
                seed: t.u64(rec, c[2])?,
                method: t.text(rec, c[3]).to_string(),
                outcome,
            })
        })
        .collect()
}

/// Recursive and batch GP posterior at one query input after `step` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoRow {
    pub step: u64,
    pub query_input: f64,
    pub mean: f64,
    pub stddev: f64,
    pub oracle_mean: f64,
    pub oracle_std: f64,
}

const DEMO_COLUMNS: [&str; 6] = ["step", "query_input", "mean", "stddev", "oracle_mean", "oracle_std"];

pub fn write_demo(path: &Path, rows: &[DemoRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                num(r.query_input),
                num(r.mean),
                num(r.stddev),
                num(r.oracle_mean),
                num(r.oracle_std),
            ]
        })
        .collect();
    table::write(path, &strings(DEMO_COLUMNS), &body)
}

pub fn parse_demo(t: &Table) -> Result<Vec<DemoRow>> {
    let c = t.require(&DEMO_COLUMNS)?;
    t.records
        .iter()
        .map(|rec| {
            Ok(DemoRow {
                step: t.u64(rec, c[0])?,
                query_input: t.f64(rec, c[1])?,
                mean: t.f64(rec, c[2])?,
                stddev: t.f64(rec, c[3])?,
                oracle_mean: t.f64(rec, c[4])?,
                oracle_std: t.f64(rec, c[5])?,
            })
        })
        .collect()
}

/// Final-step deviation of one demo case from the batch oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSummaryRow {
    pub case: String,
    pub basis_size: u64,
    pub max_mean_dev: f64,
    pub max_std_dev: f64,
}

const DEMO_SUMMARY_COLUMNS: [&str; 4] = ["case", "basis_size", "max_mean_dev", "max_std_dev"];

pub fn write_demo_summary(path: &Path, rows: &[DemoSummaryRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.case.clone(),
                r.basis_size.to_string(),
                num(r.max_mean_dev),
                num(r.max_std_dev),
            ]
        })
        .collect();
    table::write(path, &strings(DEMO_SUMMARY_COLUMNS), &body)
}

pub fn parse_demo_summary(t: &Table) -> Result<Vec<DemoSummaryRow>> {
    let c = t.require(&DEMO_SUMMARY_COLUMNS)?;
    t.records
        .iter()
        .map(|rec| {
            Ok(DemoSummaryRow {
                case: t.text(rec, c[0]).to_string(),
                basis_size: t.u64(rec, c[1])?,
                max_mean_dev: t.f64(rec, c[2])?,
                max_std_dev: t.f64(rec, c[3])?,
            })
        })
        .collect()
}
