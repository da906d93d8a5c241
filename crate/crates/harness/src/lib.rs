//! Experiment harness for `gpett-core`: configuration, Monte Carlo execution,
//! real-data ingestion, and CSV/SVG reports.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod ingest;
pub mod run;
pub mod svg;
pub mod table;

pub use config::{ExperimentConfig, Mode, Overrides};
pub use error::{HarnessError, Result};
pub use ingest::{ingest_real_scans, RealScanSet};
pub use run::{run_config, Artifacts};
