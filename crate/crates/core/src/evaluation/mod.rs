//! Ranking metrics and the repeated-split benchmark runner.

mod bench;
mod metrics;
mod report;

pub use bench::{run_benchmark, BenchmarkPlan, DatasetEntry, DatasetSource, DetectorEntry};
pub use metrics::{precision_at_n, roc_auc};
pub use report::{BenchmarkReport, CellReport, DatasetReport, RoundFailure};
