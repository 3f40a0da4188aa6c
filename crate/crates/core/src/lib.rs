//! Distributed change-point detection by average consensus over a sensor network.
//!
//! Every sensor runs a local CUSUM recursion on its own log-likelihood ratios,
//! then mixes `z + Δy` with its neighbours through a symmetric stochastic
//! weight matrix. A global alarm fires as soon as any consensus statistic
//! crosses the threshold. Two baselines share the same state machine: the
//! one-shot scheme (first local CUSUM alarm wins) and the centralized scheme
//! (sum of all local CUSUM statistics against one threshold).
//!
//! Modules:
//! - [`model`]: Gaussian mean-shift LLR model, observation streams, seed splitting.
//! - [`network`]: sensor graphs, consensus weights, λ₂ and a weight optimizer.
//! - [`detector`]: the consensus, one-shot and centralized detectors.
//! - [`experiment`]: Monte Carlo ARL/EDD estimation, calibration, comparisons.
//! - [`bounds`]: asymptotic ARL/EDD bound evaluators.

pub mod bounds;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod model;
pub mod network;
pub mod stats;

pub use detector::{Alarm, Detector, DetectorKind, DetectorState, RunOutcome};
pub use error::{Error, Result};
pub use model::{ChangeTime, LlrModel, Moments, ObservationStream, SeedSplitter};
pub use network::{SensorGraph, ValidationReport, WeightMatrix};
