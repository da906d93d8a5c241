//! Loading recorded scans and optional ground truth from CSV files.

use std::path::Path;

use gpett_core::sim::GroundTruthFrame;
use gpett_core::tracker::Scan;

use crate::error::{HarnessError, Result};
use crate::formats::{parse_contours, parse_scans, parse_truth};
use crate::table::Table;

/// Scans grouped by frame, with ground truth for every frame when available.
#[derive(Debug, Clone, PartialEq)]
pub struct RealScanSet {
    pub frame_ids: Vec<u64>,
    /// Strictly increasing in time.
    pub scans: Vec<Scan>,
    pub truth: Option<Vec<GroundTruthFrame>>,
}

/// Reads a scan file and, when both are given, truth kinematics and contours.
/// Truth must cover exactly the scan frames, at the same times.
pub fn ingest_real_scans(
    scan_path: &Path,
    truth_path: Option<&Path>,
    contour_path: Option<&Path>,
) -> Result<RealScanSet> {
    let (frame_ids, scans) = parse_scans(&Table::read(scan_path)?)?;
    let truth = match (truth_path, contour_path) {
        (None, None) => None,
        (Some(tp), Some(cp)) => Some(load_truth(&frame_ids, &scans, tp, cp)?),
        _ => {
            return Err(HarnessError::Config(
                "truth and contour files must be given together".into(),
            ))
        }
    };
    Ok(RealScanSet {
        frame_ids,
        scans,
        truth,
    })
}

fn load_truth(
    frame_ids: &[u64],
    scans: &[Scan],
    truth_path: &Path,
    contour_path: &Path,
) -> Result<Vec<GroundTruthFrame>> {
    let source = truth_path.display().to_string();
    let rows = parse_truth(&Table::read(truth_path)?)?;
    let (contour_ids, contours) = parse_contours(&Table::read(contour_path)?)?;
    if rows.len() != frame_ids.len() {
        return Err(HarnessError::validation(
            &source,
            format!("{} truth rows for {} scan frames", rows.len(), frame_ids.len()),
        ));
    }
    frame_ids
        .iter()
        .zip(scans)
        .zip(rows)
        .map(|((&id, scan), row)| {
            if row.frame_id != id || row.time != scan.time {
                return Err(HarnessError::validation(
                    &source,
                    format!(
                        "truth frame {} at t={} does not match scan frame {id} at t={}",
                        row.frame_id, row.time, scan.time
                    ),
                ));
            }
            let k = contour_ids.iter().position(|&c| c == id).ok_or_else(|| {
                HarnessError::validation(
                    &contour_path.display().to_string(),
                    format!("no contour for frame {id}"),
                )
            })?;
            Ok(GroundTruthFrame {
                time: row.time,
                center: row.center,
                velocity: row.velocity,
                psi: row.psi,
                contour: contours[k].clone(),
            })
        })
        .collect()
}
