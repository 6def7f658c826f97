//! Metrics, reports, the patch-size benchmark and plots.

mod bench;
mod metrics;
mod plot;

pub use bench::{
    attention_macs, bench_table, complexity_benchmark, sweep_config, BenchRow, BENCH_EPOCHS,
    DEFAULT_PATCH_SIZES,
};
pub use metrics::{
    classification_report, confusion_matrix, evaluate_classification, evaluate_regression,
    regression_report, MetricsReport, Task,
};
pub use plot::{line_chart, Series};
