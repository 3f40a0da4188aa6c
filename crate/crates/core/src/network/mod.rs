//! Sensor graphs and consensus weight matrices.

mod graph;
pub mod io;
mod optimize;
pub mod spectral;
mod weights;

pub use graph::SensorGraph;
pub use optimize::{optimize_weights, DEFAULT_ITERATIONS, DEFAULT_STEP};
pub use spectral::lambda2;
pub use weights::{
    damped_max_degree_weights, graph_from_pattern, max_degree_entries, max_degree_weights,
    validate_entries, CheckResult, Condition, ValidationReport, WeightMatrix,
};
