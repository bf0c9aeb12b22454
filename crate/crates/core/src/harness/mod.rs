//! Experiment orchestration: the hold-out protocol over datasets, train
//! fractions, techniques and cutoffs, plus report rendering, model files and
//! ranking-time benchmarks.

mod bench;
mod experiment;
mod persist;
mod report;
pub mod synthetic;

pub use bench::{benchmark, BenchmarkStats, Ranker};
pub use experiment::{
    run_experiment, run_experiment_on, CellResult, DatasetSpec, ExperimentConfig, ExperimentReport,
    LoadedDataset, MetricKind, SignificanceRow, Technique, TimingRow,
};
pub use persist::{load_model, model_from_str, model_to_string, save_model};
pub use report::{emit_report, emit_significance_csv, emit_timing_csv, parse_report_csv, ReportFormat, ReportRow};
