//! Monte Carlo experiments, data ingestion and single-dataset analysis.

pub mod analyze;
pub mod config;
pub mod experiment;
pub mod ingest;

pub use analyze::{analyze, load_hypothesis, AnalysisRecord, HypothesisSource};
pub use config::{DimSplit, ExperimentConfig, GridPoint, ScenarioConfig};
pub use experiment::{
    read_rows, replay_replication, rows_to_csv, run_experiment, write_rows, write_timings, ExperimentOutcome,
    PointTiming, ResultRow,
};
pub use ingest::{ingest_data, ingest_groups, read_matrix_csv, write_matrix_csv, write_sample, IngestOptions};
