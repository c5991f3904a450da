//! Training strategies, the epoch loop, experiment grids, reports and the
//! command line front end.

pub mod cli;
mod config;
mod metrics;
mod report;
mod suite;
mod train;

pub use config::{DatasetSource, ExperimentConfig, Strategy};
pub use metrics::{
    read_jsonl, read_jsonl_file, read_summary_csv, write_jsonl, write_jsonl_file, write_summary_csv, SUMMARY_HEADER,
};
pub use report::{report, report_files, write_report, CurvePoint, Report};
pub use suite::{run_suite, CellOutcome, SuiteGrid, SuiteResult};
pub use train::{
    accuracy, load_base, prepare, run_repeat, train, train_on, train_with_model, EpochRecord, OdTraceRecord,
    PreparedData, RepeatMetrics, RunMetrics, SummaryRow,
};
