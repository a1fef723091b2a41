//! Configured experiments: ingestion, frequency sweeps, mixing runs and
//! their CSV/JSON reports.

pub mod config;
pub mod ingest;
pub mod report;
pub mod sweep;

pub use config::{default_sweep, AnalysisConfig, ExperimentConfig, MixingConfig, PathSelection};
pub use ingest::{ingest_csv, ingest_csv_path, write_recording, Recording};
pub use report::{emit_report, Format, Report};
pub use sweep::{
    run_mixing, run_sweep, ChannelSeries, MixingResult, Provenance, SweepPoint, SweepResult,
};
