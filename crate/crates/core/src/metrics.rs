//! Evaluation measures: shape precision and recall from rasterized polygon
//! overlap, center-of-object RMSE, and mean percentage improvement.
//!
//! Areas are measured on a fixed world grid of horizontal scanlines spaced
//! `1/resolution` apart. Along each scanline the inside intervals are exact,
//! so the area error is bounded by roughly `perimeter / resolution`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tracker::{contour_from_extent, TrackEstimate};
use crate::gp_model::BasisProjector;
use crate::sim::GroundTruthFrame;
use crate::Point;

/// Default raster resolution, cells per metre.
pub const DEFAULT_RESOLUTION: f64 = 100.0;
/// Vertices used for estimated contours during evaluation.
pub const EVAL_CONTOUR_VERTICES: usize = 360;

#[derive(Debug, Clone, Copy)]
struct Edge {
    y_lo: f64,
    y_hi: f64,
    x_at_lo: f64,
    slope: f64,
}

/// Even-odd scanline rasterizer for one closed polygon.
struct Scanner {
    edges: Vec<Edge>,
    next: usize,
    active: Vec<Edge>,
    crossings: Vec<f64>,
}

impl Scanner {
    fn new(poly: &[Point]) -> Self {
        let n = poly.len();
        let mut edges: Vec<Edge> = (0..n)
            .filter_map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if a[1] == b[1] {
                    return None;
                }
                let (lo, hi) = if a[1] < b[1] { (a, b) } else { (b, a) };
                Some(Edge {
                    y_lo: lo[1],
                    y_hi: hi[1],
                    x_at_lo: lo[0],
                    slope: (hi[0] - lo[0]) / (hi[1] - lo[1]),
                })
            })
            .collect();
        edges.sort_by(|a, b| a.y_lo.total_cmp(&b.y_lo));
        Scanner {
            edges,
            next: 0,
            active: Vec::new(),
            crossings: Vec::new(),
        }
    }

    /// Inside intervals at height `y`; heights must be visited in increasing order.
    fn intervals(&mut self, y: f64, out: &mut Vec<(f64, f64)>) {
        while self.next < self.edges.len() && self.edges[self.next].y_lo <= y {
            self.active.push(self.edges[self.next]);
            self.next += 1;
        }
        self.active.retain(|e| e.y_hi > y);
        self.crossings.clear();
        self.crossings.extend(
            self.active
                .iter()
                .filter(|e| e.y_lo <= y)
                .map(|e| e.x_at_lo + (y - e.y_lo) * e.slope),
        );
        self.crossings.sort_by(f64::total_cmp);
        out.clear();
        out.extend(self.crossings.chunks_exact(2).map(|c| (c[0], c[1])));
    }
}

fn check_polygon(poly: &[Point]) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::invalid("polygon needs at least 3 vertices"));
    }
    if poly.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("polygon vertices must be finite"));
    }
    Ok(())
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid("resolution must be positive"));
    }
    Ok(())
}

fn y_range(poly: &[Point]) -> (f64, f64) {
    poly.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[1]), hi.max(p[1]))
        })
}

/// Scanline heights `(k + ½)/resolution` of the world grid inside `[lo, hi]`.
fn scanlines(lo: f64, hi: f64, resolution: f64) -> core::ops::RangeInclusive<i64> {
    let first = libm::ceil(lo * resolution - 0.5) as i64;
    let last = libm::floor(hi * resolution - 0.5) as i64;
    first..=last
}

fn overlap_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Rasterized area of a closed polygon.
pub fn polygon_area_raster(poly: &[Point], resolution: f64) -> Result<f64> {
    check_polygon(poly)?;
    check_resolution(resolution)?;
    let (lo, hi) = y_range(poly);
    let mut scanner = Scanner::new(poly);
    let mut spans = Vec::new();
    let mut total = 0.0;
    for k in scanlines(lo, hi, resolution) {
        scanner.intervals((k as f64 + 0.5) / resolution, &mut spans);
        total += spans.iter().map(|(a, b)| b - a).sum::<f64>();
    }
    Ok(total / resolution)
}

/// Rasterized area of the intersection of two closed polygons.
pub fn polygon_intersection_area(a: &[Point], b: &[Point], resolution: f64) -> Result<f64> {
    check_polygon(a)?;
    check_polygon(b)?;
    check_resolution(resolution)?;
    let (a_lo, a_hi) = y_range(a);
    let (b_lo, b_hi) = y_range(b);
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if hi < lo {
        return Ok(0.0);
    }
    let mut sa = Scanner::new(a);
    let mut sb = Scanner::new(b);
    let (mut ia, mut ib) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for k in scanlines(lo, hi, resolution) {
        let y = (k as f64 + 0.5) / resolution;
        sa.intervals(y, &mut ia);
        sb.intervals(y, &mut ib);
        total += overlap_length(&ia, &ib);
    }
    Ok(total / resolution)
}

/// Shape precision `|est∩truth|/|est|` and recall `|est∩truth|/|truth|`.
pub fn precision_recall_frame(est: &[Point], truth: &[Point], resolution: f64) -> Result<(f64, f64)> {
    let inter = polygon_intersection_area(est, truth, resolution)?;
    let est_area = polygon_area_raster(est, resolution)?;
    let truth_area = polygon_area_raster(truth, resolution)?;
    if est_area <= 0.0 {
        return Err(Error::DegenerateEstimate(String::from(
            "estimated contour has zero area",
        )));
    }
    if truth_area <= 0.0 {
        return Err(Error::invalid("true contour has zero area"));
    }
    Ok((
        (inter / est_area).clamp(0.0, 1.0),
        (inter / truth_area).clamp(0.0, 1.0),
    ))
}

/// Signed shoelace area, positive for counter-clockwise polygons.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Area centroid of a closed polygon, used as the center of the object.
pub fn coo_from_contour(contour: &[Point]) -> Result<Point> {
    check_polygon(contour)?;
    // shift to the first vertex to limit cancellation far from the origin
    let o = contour[0];
    let n = contour.len();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = [contour[i][0] - o[0], contour[i][1] - o[1]];
        let q = [contour[(i + 1) % n][0] - o[0], contour[(i + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    let scale = contour
        .iter()
        .map(|p| libm::hypot(p[0] - o[0], p[1] - o[1]))
        .fold(0.0, f64::max);
    if libm::fabs(a2) <= 1e-12 * scale * scale {
        return Err(Error::DegenerateEstimate(String::from(
            "contour has zero area",
        )));
    }
    Ok([o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)])
}

/// Root mean square of `errors`.
pub fn rmse_series(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("RMSE of an empty series"));
    }
    let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(libm::sqrt(mean_sq))
}

/// Whether larger values of a measure are worse (errors) or better (scores).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    ErrorLike,
    ScoreLike,
}

/// Percentage improvement of `method` over `baseline`; positive means
/// `method` is better.
pub fn mean_percentage_improvement(baseline: f64, method: f64, kind: MeasureKind) -> Result<f64> {
    if !(baseline > 0.0) || !baseline.is_finite() || !method.is_finite() {
        return Err(Error::invalid(format!(
            "percentage improvement needs a positive finite baseline, got {baseline}"
        )));
    }
    Ok(match kind {
        MeasureKind::ErrorLike => 100.0 * (baseline - method) / baseline,
        MeasureKind::ScoreLike => 100.0 * (method - baseline) / baseline,
    })
}

/// Evaluation of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEval {
    pub time: f64,
    pub precision: f64,
    pub recall: f64,
    pub coo_est: Point,
    pub coo_true: Point,
    pub vel_est: Point,
    pub vel_true: Point,
}

/// Compares an estimated contour and velocity with the ground truth.
pub fn evaluate_frame(
    est_contour: &[Point],
    est_velocity: Point,
    truth: &GroundTruthFrame,
    resolution: f64,
) -> Result<FrameEval> {
    let (precision, recall) = precision_recall_frame(est_contour, &truth.contour, resolution)?;
    Ok(FrameEval {
        time: truth.time,
        precision,
        recall,
        coo_est: coo_from_contour(est_contour)?,
        coo_true: coo_from_contour(&truth.contour)?,
        vel_est: est_velocity,
        vel_true: truth.velocity,
    })
}

/// Evaluates a sequence of track estimates frame by frame against truth.
pub fn evaluate_track(
    projector: &BasisProjector,
    estimates: &[TrackEstimate],
    truth: &[GroundTruthFrame],
    resolution: f64,
) -> Result<Vec<FrameEval>> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimates for {} truth frames",
            estimates.len(),
            truth.len()
        )));
    }
    estimates
        .iter()
        .zip(truth)
        .map(|(est, gt)| {
            let contour = contour_from_extent(
                projector,
                est.center,
                est.psi,
                &est.extent,
                EVAL_CONTOUR_VERTICES,
            )?;
            evaluate_frame(&contour, est.velocity, gt, resolution)
        })
        .collect()
}

/// The six reported measures, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Measure {
    X,
    Y,
    Vx,
    Vy,
    Precision,
    Recall,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::X,
        Measure::Y,
        Measure::Vx,
        Measure::Vy,
        Measure::Precision,
        Measure::Recall,
    ];

    pub fn kind(self) -> MeasureKind {
        match self {
            Measure::Precision | Measure::Recall => MeasureKind::ScoreLike,
            _ => MeasureKind::ErrorLike,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Measure::X => "rmse_x",
            Measure::Y => "rmse_y",
            Measure::Vx => "rmse_vx",
            Measure::Vy => "rmse_vy",
            Measure::Precision => "P",
            Measure::Recall => "R",
        }
    }

    pub fn from_label(label: &str) -> Option<Measure> {
        Measure::ALL.into_iter().find(|m| m.label() == label)
    }
}

/// Mean precision/recall and per-axis RMSE of one run (or an average of runs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_vx: f64,
    pub rmse_vy: f64,
}

impl RunSummary {
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::X => self.rmse_x,
            Measure::Y => self.rmse_y,
            Measure::Vx => self.rmse_vx,
            Measure::Vy => self.rmse_vy,
            Measure::Precision => self.mean_precision,
            Measure::Recall => self.mean_recall,
        }
    }
}

pub fn summarize_run(evals: &[FrameEval]) -> Result<RunSummary> {
    if evals.is_empty() {
        return Err(Error::invalid("no frames to summarize"));
    }
    let n = evals.len() as f64;
    let series = |f: &dyn Fn(&FrameEval) -> f64| -> Result<f64> {
        let errs: Vec<f64> = evals.iter().map(f).collect();
        rmse_series(&errs)
    };
    Ok(RunSummary {
        mean_precision: evals.iter().map(|e| e.precision).sum::<f64>() / n,
        mean_recall: evals.iter().map(|e| e.recall).sum::<f64>() / n,
        rmse_x: series(&|e| e.coo_est[0] - e.coo_true[0])?,
        rmse_y: series(&|e| e.coo_est[1] - e.coo_true[1])?,
        rmse_vx: series(&|e| e.vel_est[0] - e.vel_true[0])?,
        rmse_vy: series(&|e| e.vel_est[1] - e.vel_true[1])?,
    })
}

/// Per-method aggregate over the successful runs of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    /// Average of the per-run summaries.
    pub mean: RunSummary,
    pub runs: Vec<RunSummary>,
    pub failed_runs: usize,
}

impl MethodSummary {
    pub fn from_runs(runs: Vec<RunSummary>, failed_runs: usize) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::invalid("no successful runs to aggregate"));
        }
        let n = runs.len() as f64;
        let avg = |m: Measure| runs.iter().map(|r| r.get(m)).sum::<f64>() / n;
        let mean = RunSummary {
            mean_precision: avg(Measure::Precision),
            mean_recall: avg(Measure::Recall),
            rmse_x: avg(Measure::X),
            rmse_y: avg(Measure::Y),
            rmse_vx: avg(Measure::Vx),
            rmse_vy: avg(Measure::Vy),
        };
        Ok(MethodSummary {
            mean,
            runs,
            failed_runs,
        })
    }
}

/// Measures per method and scenario, with percentage improvements over an
/// optional baseline method.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenarios: Vec<String>,
    pub methods: Vec<String>,
    /// `cells[method][scenario]`.
    pub cells: Vec<Vec<MethodSummary>>,
    pub baseline: Option<String>,
}

/// One row of the improvement table.
#[derive(Debug, Clone, PartialEq)]
pub struct MpiRow {
    pub measure: Measure,
    pub method: String,
    /// One value per scenario.
    pub values: Vec<f64>,
}

impl MetricsReport {
    pub fn new(
        scenarios: Vec<String>,
        methods: Vec<String>,
        cells: Vec<Vec<MethodSummary>>,
        baseline: Option<String>,
    ) -> Result<Self> {
        if methods.is_empty() {
            return Err(Error::invalid("report needs at least one method"));
        }
        if cells.len() != methods.len() || cells.iter().any(|row| row.len() != scenarios.len()) {
            return Err(Error::invalid("report cells do not match methods × scenarios"));
        }
        if let Some(b) = &baseline {
            if !methods.contains(b) {
                return Err(Error::invalid(format!("unknown baseline method {b}")));
            }
        }
        Ok(MetricsReport {
            scenarios,
            methods,
            cells,
            baseline,
        })
    }

    /// Mean value of `measure` for `method` on `scenario`.
    pub fn value(&self, measure: Measure, method: usize, scenario: usize) -> f64 {
        self.cells[method][scenario].mean.get(measure)
    }

    /// Improvement rows (measure × non-baseline method) when a baseline is set.
    pub fn mpi_table(&self) -> Result<Option<Vec<MpiRow>>> {
        let Some(baseline) = &self.baseline else {
            return Ok(None);
        };
        let b = self
            .methods
            .iter()
            .position(|m| m == baseline)
            .ok_or_else(|| Error::invalid(format!("unknown baseline method {baseline}")))?;
        let mut rows = Vec::new();
        for measure in Measure::ALL {
            for (mi, method) in self.methods.iter().enumerate() {
                if mi == b {
                    continue;
                }
                let values = (0..self.scenarios.len())
                    .map(|s| {
                        mean_percentage_improvement(
                            self.value(measure, b, s),
                            self.value(measure, mi, s),
                            measure.kind(),
                        )
                    })
                    .collect::<Result<_>>()?;
                rows.push(MpiRow {
                    measure,
                    method: method.clone(),
                    values,
                });
            }
        }
        Ok(Some(rows))
    }
}
