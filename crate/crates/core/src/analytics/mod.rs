//! Behavioral metrics over session logs: dwell, free exploration, dwell
//! heatmaps, spatial entropy and per-condition summaries.

mod heatmap;
mod metrics;
mod report;

use thiserror::Error;

use crate::harness::MalformedLog;

pub use heatmap::{
    colormap, entropy_of, heatmap, render_ppm, spatial_entropy, spatial_entropy_base,
    EntropyResult, Heatmap, LogBase, DEFAULT_CELL_SIZE_M,
};
pub use metrics::{dwell_time, free_exploration_time, response_times};
pub use report::{
    group_rows, log_files, metric_row, summarize, Aggregate, FileError, GroupSummary, MetricReport,
    MetricRow, METRICS_FILE, SUMMARY_FILE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Malformed(#[from] MalformedLog),
    #[error("log has no user trajectory")]
    EmptyTrajectory,
    #[error("heatmap holds no dwell time")]
    EmptyHeatmap,
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Io(String),
    #[error("no readable session logs ({0} files failed)")]
    NoValidLogs(usize),
}
