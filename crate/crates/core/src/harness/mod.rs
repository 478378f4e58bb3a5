//! Experiment orchestration: mixture-ratio curves, monotonicity tables and
//! the detection power / Type-I study.

mod config;
mod detection;
mod mixture;
mod table;

pub use config::{ExperimentConfig, StudyMode, StudySettings};
pub use detection::{
    detection_study, repeated_tests, run_detection, DetectionData, DetectionReport, RepeatedTrial,
    TrialRecord,
};
pub use mixture::{mixture_curve, MixtureCurve, Trend, TREND_THRESHOLD};
pub use table::{monotonicity_table, MonotonicityTable, TableEntry};
