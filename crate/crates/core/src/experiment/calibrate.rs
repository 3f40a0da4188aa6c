//! Threshold calibration to a target ARL by bisection with common random numbers.
//!
//! A detector's statistic path does not depend on `b`: on a fixed trial,
//! `T(b)` is the first time the running maximum of `max_v z_v^t` reaches `b`.
//! Each trial therefore keeps its runner alive together with the record
//! values of that running maximum, and every bisection iterate reuses the
//! same paths. Trials are only advanced as far as a decision needs, which
//! keeps the cost close to `trials × target` steps whatever the bracket.
//!
//! Thresholds are bisected in per-sensor units (`b / n` for the centralized
//! detector), so K4 consensus and the centralized sum visit the same
//! iterates on shared seeds and come out exactly a factor `n` apart.

use rayon::prelude::*;

use super::engine::{in_pool, MonteCarlo, TrialRunner};
use super::metrics::{Metric, MetricsReport};
use super::scenario::ChangeScenario;
use crate::detector::{Detector, DetectorKind};
use crate::error::{Error, Result};
use crate::model::{LlrModel, SeedSplitter};

pub const DEFAULT_TOLERANCE: f64 = 0.05;
pub const MAX_BISECTION_STEPS: usize = 60;
/// Bisection stops early once the ARL is within this fraction of the band.
pub const REFINE_FRACTION: f64 = 0.1;
/// Default censoring horizon as a multiple of the target ARL.
pub const DEFAULT_T_MAX_FACTOR: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub target_arl: f64,
    /// Relative tolerance on the ARL, e.g. 0.05 for ±5%.
    pub tolerance: f64,
    pub mc: MonteCarlo,
}

impl CalibrationOptions {
    /// Default tolerance and `t_max = 20 × target`.
    pub fn new(target_arl: f64, trials: usize, seed: u64) -> Self {
        let t_max = (target_arl.max(1.0) * DEFAULT_T_MAX_FACTOR as f64).ceil() as u64;
        Self {
            target_arl,
            tolerance: DEFAULT_TOLERANCE,
            mc: MonteCarlo::new(trials, t_max, seed),
        }
    }
}

/// A calibrated threshold with the ARL estimate it was accepted on.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub target_arl: f64,
    pub arl: MetricsReport,
    /// Bracket expansions plus bisection steps.
    pub iterations: usize,
}

impl Calibration {
    pub fn detector(&self, kind: DetectorKind) -> Result<Detector> {
        Detector::new(kind, self.threshold)
    }
}

/// Threshold units per sensor-normalised unit.
fn threshold_scale(kind: &DetectorKind, n: usize) -> f64 {
    match kind {
        DetectorKind::Centralized => n as f64,
        _ => 1.0,
    }
}

struct NullPath {
    runner: TrialRunner,
    running_max: f64,
    /// `(t, value)` each time the running maximum increased.
    records: Vec<(u64, f64)>,
}

impl NullPath {
    fn stop_time(&self, b: f64) -> Option<u64> {
        if self.running_max < b {
            return None;
        }
        let k = self.records.partition_point(|&(_, v)| v < b);
        Some(self.records[k].0)
    }

    /// `(value, exact)`: the trial's contribution to the ARL sum at `b`, or a
    /// lower bound on it when the trial has not been run far enough.
    fn contribution(&self, b: f64, t_max: u64) -> (u64, bool) {
        match self.stop_time(b) {
            Some(t) => (t, true),
            None if self.runner.t() >= t_max => (t_max, true),
            None => ((self.runner.t() + 1).min(t_max), false),
        }
    }

    fn extend(&mut self, b: f64, steps: u64, t_max: u64) {
        let stop = (self.runner.t() + steps).min(t_max);
        while self.running_max < b && self.runner.t() < stop {
            let m = self.runner.advance();
            if m > self.running_max {
                self.running_max = m;
                self.records.push((self.runner.t(), m));
            }
        }
    }
}

enum Evaluation {
    /// ARL at `b` is at least the cut-off.
    AtLeast,
    /// Every trial resolved at `b`.
    Exact(Vec<Option<u64>>),
}

struct Bisector<'a> {
    paths: Vec<NullPath>,
    mc: &'a MonteCarlo,
}

impl Bisector<'_> {
    /// Resolve trials at `b` in rounds, stopping early once the ARL lower
    /// bound reaches `cut`. Round sizes depend only on `cut`, so the outcome
    /// is independent of scheduling.
    fn evaluate(&mut self, b: f64, cut: f64) -> Evaluation {
        let t_max = self.mc.t_max;
        let trials = self.paths.len() as f64;
        let chunk = ((cut / 4.0).ceil() as u64).max(64);
        loop {
            let (sum, unresolved) = self
                .paths
                .iter()
                .map(|p| p.contribution(b, t_max))
                .fold((0u64, 0usize), |(s, u), (v, exact)| (s + v, u + usize::from(!exact)));
            if unresolved == 0 {
                let times = self
                    .paths
                    .iter()
                    .map(|p| p.stop_time(b).filter(|&t| t <= t_max))
                    .collect();
                return Evaluation::Exact(times);
            }
            if sum as f64 / trials >= cut {
                return Evaluation::AtLeast;
            }
            self.paths.par_iter_mut().for_each(|p| p.extend(b, chunk, t_max));
        }
    }
}

/// Find `b` whose ARL estimate on `opts.mc.trials` null trials is within
/// `tolerance × target` of the target.
pub fn calibrate_threshold(
    kind: &DetectorKind,
    model: &LlrModel,
    n: usize,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let target = opts.target_arl;
    if !(target.is_finite() && target >= 2.0) {
        return Err(Error::usage(format!("target ARL must be at least 2, got {target}")));
    }
    if !(opts.tolerance > 0.0 && opts.tolerance < 1.0) {
        return Err(Error::usage(format!(
            "tolerance must be a fraction in (0, 1), got {}",
            opts.tolerance
        )));
    }
    let mc = &opts.mc;
    mc.check()?;
    if (mc.t_max as f64) < target * (1.0 + opts.tolerance) {
        return Err(Error::usage(format!(
            "t_max = {} cannot resolve a target ARL of {target}",
            mc.t_max
        )));
    }
    Detector::new(kind.clone(), 1.0)?.initial_state(n)?;

    let scale = threshold_scale(kind, n);
    let seeds = SeedSplitter::new(mc.seed);
    let scenario = ChangeScenario::no_change(n);

    in_pool(mc.threads, || {
        let paths = (0..mc.trials as u64)
            .into_par_iter()
            .map(|i| NullPath {
                runner: TrialRunner::new(kind, model, &scenario, &seeds, i),
                running_max: f64::NEG_INFINITY,
                records: Vec::new(),
            })
            .collect();
        let mut bisector = Bisector { paths, mc };
        let lo_cut = target * (1.0 - opts.tolerance);
        let hi_cut = target * (1.0 + opts.tolerance);
        let accept = |beta: f64, times: Vec<Option<u64>>, iterations: usize| {
            let arl = MetricsReport::from_stopping_times(Metric::Arl, &times, mc.t_max);
            (arl.estimate >= lo_cut && arl.estimate <= hi_cut).then(|| Calibration {
                threshold: beta * scale,
                target_arl: target,
                arl,
                iterations,
            })
        };

        // ARL(0) = 1 < target, so 0 is a valid lower end.
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut lo_arl = 1.0;
        let mut best: Option<Calibration> = None;
        let mut iterations = 0;
        let close_enough =
            |c: &Calibration| (c.arl.estimate - target).abs() <= REFINE_FRACTION * opts.tolerance * target;
        let mut consider = |beta: f64, times: Vec<Option<u64>>, iterations: usize| {
            let c = accept(beta, times, iterations)?;
            let better = best
                .as_ref()
                .map_or(true, |b| (c.arl.estimate - target).abs() < (b.arl.estimate - target).abs());
            if better {
                best = Some(c.clone());
            }
            Some(c)
        };
        loop {
            iterations += 1;
            if iterations > MAX_BISECTION_STEPS {
                return Err(Error::Calibration(format!(
                    "no threshold up to {} reaches ARL {target} (t_max = {})",
                    hi * scale,
                    mc.t_max
                )));
            }
            match bisector.evaluate(hi * scale, target) {
                Evaluation::AtLeast => break,
                Evaluation::Exact(times) => {
                    let report = MetricsReport::from_stopping_times(Metric::Arl, &times, mc.t_max);
                    if let Some(c) = consider(hi, times, iterations) {
                        if close_enough(&c) {
                            return Ok(c);
                        }
                    }
                    if report.estimate >= target {
                        break;
                    }
                    lo = hi;
                    lo_arl = report.estimate;
                    hi *= 2.0;
                }
            }
        }

        // Bisect until an iterate lands well inside the band; an in-band
        // iterate that is merely near its edge is kept as a fallback.
        for step in 1..=MAX_BISECTION_STEPS {
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match bisector.evaluate(mid * scale, hi_cut) {
                Evaluation::AtLeast => hi = mid,
                Evaluation::Exact(times) => {
                    let report = MetricsReport::from_stopping_times(Metric::Arl, &times, mc.t_max);
                    if let Some(c) = consider(mid, times, iterations + step) {
                        if close_enough(&c) {
                            return Ok(c);
                        }
                    }
                    if report.estimate < target {
                        lo = mid;
                        lo_arl = report.estimate;
                    } else {
                        hi = mid;
                    }
                }
            }
        }
        best.ok_or_else(|| {
            Error::Calibration(format!(
                "{MAX_BISECTION_STEPS} bisection steps left the bracket [{}, {}] with ARL({}) = {lo_arl:.2} \
                 for target {target}; the ARL jumps across the tolerance band, try more trials",
                lo * scale,
                hi * scale,
                lo * scale
            ))
        })
    })?
}
