//! Monte Carlo estimation of ARL and EDD, threshold calibration and
//! multi-detector comparisons.

mod calibrate;
mod compare;
mod engine;
mod metrics;
mod scenario;

pub use calibrate::{
    calibrate_threshold, Calibration, CalibrationOptions, DEFAULT_TOLERANCE, DEFAULT_T_MAX_FACTOR,
    MAX_BISECTION_STEPS,
};
pub use compare::{
    compare_detectors, overlay_bounds, run_comparison, CalibratedDetector, ComparisonRow, CsvWriter,
    DetectorSpec, ExperimentConfig, BOUND_COLUMNS, CSV_HEADER, PHASE_CALIBRATE, PHASE_EVALUATE,
};
pub use engine::{estimate_arl, estimate_edd, stopping_times, MonteCarlo};
pub use metrics::{Metric, MetricsReport, CENSORING_FLAG_FRACTION};
pub use scenario::{ChangeScenario, ScenarioKind};
