//! Consensus CUSUM detector and its one-shot and centralized baselines.
//!
//! All three share one state machine. Per step, with LLR vector `L`:
//!
//! ```text
//! y' = max(y + L, 0)                 local CUSUM, reflected at zero
//! z' = W (z + y' − y)                consensus
//! z' = y'                            one-shot
//! z' = (Σ y') 𝟏                      centralized
//! ```
//!
//! and the alarm fires at the first `t` with `max_v z_v^t ≥ b`.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::ObservationStream;
use crate::network::WeightMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    Consensus(Arc<WeightMatrix>),
    OneShot,
    Centralized,
}

impl DetectorKind {
    pub fn consensus(w: WeightMatrix) -> Self {
        DetectorKind::Consensus(Arc::new(w))
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Consensus(_) => "consensus",
            DetectorKind::OneShot => "one_shot",
            DetectorKind::Centralized => "centralized",
        }
    }

    /// Sensor count fixed by the kind, if any.
    pub fn sensors(&self) -> Option<usize> {
        match self {
            DetectorKind::Consensus(w) => Some(w.n()),
            _ => None,
        }
    }

    /// Advance `y` and `z` by one step and return the monitoring statistic
    /// `max_v z_v` with its arg-max (lowest index on ties). Thresholds play no
    /// part here, which lets calibration reuse one trajectory for every `b`.
    #[inline]
    pub(crate) fn advance(&self, state: &mut DetectorState, llr: &[f64]) -> (f64, usize) {
        let DetectorState { y, z, scratch, .. } = state;
        match self {
            DetectorKind::Consensus(w) => {
                for v in 0..y.len() {
                    let next = (y[v] + llr[v]).max(0.0);
                    scratch[v] = z[v] + next - y[v];
                    y[v] = next;
                }
                w.apply(scratch, z);
            }
            DetectorKind::OneShot => {
                for v in 0..y.len() {
                    y[v] = (y[v] + llr[v]).max(0.0);
                    z[v] = y[v];
                }
            }
            DetectorKind::Centralized => {
                for v in 0..y.len() {
                    y[v] = (y[v] + llr[v]).max(0.0);
                }
                let total: f64 = y.iter().sum();
                z.iter_mut().for_each(|zv| *zv = total);
            }
        }
        state.t += 1;
        argmax(&state.z)
    }
}

#[inline]
fn argmax(z: &[f64]) -> (f64, usize) {
    let mut best = (z[0], 0);
    for (v, &val) in z.iter().enumerate().skip(1) {
        if val > best.0 {
            best = (val, v);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alarm {
    pub time: u64,
    pub sensor: usize,
}

/// Local CUSUM vector `y` and consensus vector `z` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    t: u64,
    y: Vec<f64>,
    z: Vec<f64>,
    scratch: Vec<f64>,
    alarm: Option<Alarm>,
}

impl DetectorState {
    /// `y⁰ = z⁰ = 0`.
    pub fn new(n: usize) -> Self {
        Self {
            t: 0,
            y: vec![0.0; n],
            z: vec![0.0; n],
            scratch: vec![0.0; n],
            alarm: None,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn alarmed(&self) -> bool {
        self.alarm.is_some()
    }

    pub fn alarm(&self) -> Option<Alarm> {
        self.alarm
    }
}

/// A detector kind together with its alarm threshold `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    kind: DetectorKind,
    threshold: f64,
}

impl Detector {
    pub fn new(kind: DetectorKind, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::usage(format!(
                "threshold must be finite and positive, got {threshold}"
            )));
        }
        Ok(Self { kind, threshold })
    }

    pub fn kind(&self) -> &DetectorKind {
        &self.kind
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn initial_state(&self, n: usize) -> Result<DetectorState> {
        self.check_dimension(n)?;
        Ok(DetectorState::new(n))
    }

    fn check_dimension(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::usage("detector needs at least one sensor"));
        }
        match self.kind.sensors() {
            Some(m) if m != n => Err(Error::usage(format!(
                "weight matrix is {m}x{m} but {n} sensors were supplied"
            ))),
            _ => Ok(()),
        }
    }

    /// One time step with LLR values `L_v(x_v^{t+1})`. Returns the alarm if
    /// the step raised one.
    pub fn step(&self, state: &mut DetectorState, llr: &[f64]) -> Result<Option<Alarm>> {
        if state.alarmed() {
            return Err(Error::usage(format!(
                "detector already alarmed at t = {}",
                state.alarm.map(|a| a.time).unwrap_or_default()
            )));
        }
        if llr.len() != state.n() {
            return Err(Error::usage(format!(
                "expected {} LLR values, got {}",
                state.n(),
                llr.len()
            )));
        }
        self.check_dimension(state.n())?;
        let (max, sensor) = self.kind.advance(state, llr);
        if max >= self.threshold {
            state.alarm = Some(Alarm { time: state.t, sensor });
        }
        Ok(state.alarm)
    }

    /// Feed `llr(sample)` from every stream until the alarm or `t_max`.
    pub fn run_to_alarm(&self, streams: &mut [ObservationStream], t_max: u64) -> Result<RunOutcome> {
        self.run_to_alarm_with(streams, t_max, |_| Ok(()))
    }

    /// As [`Detector::run_to_alarm`], calling `observe` after every step.
    pub fn run_to_alarm_with<F>(
        &self,
        streams: &mut [ObservationStream],
        t_max: u64,
        mut observe: F,
    ) -> Result<RunOutcome>
    where
        F: FnMut(&DetectorState) -> Result<()>,
    {
        if t_max == 0 {
            return Err(Error::usage("t_max must be at least 1"));
        }
        let mut state = self.initial_state(streams.len())?;
        let mut llr = vec![0.0; streams.len()];
        while state.t < t_max {
            let t = state.t + 1;
            for (l, s) in llr.iter_mut().zip(streams.iter_mut()) {
                let x = s.sample(t)?;
                *l = s.model().llr(x);
            }
            let alarm = self.step(&mut state, &llr)?;
            observe(&state)?;
            if let Some(a) = alarm {
                return Ok(RunOutcome {
                    stopping_time: Some(a.time),
                    state,
                });
            }
        }
        Ok(RunOutcome {
            stopping_time: None,
            state,
        })
    }
}

/// Result of [`Detector::run_to_alarm`]; `stopping_time` is `None` when censored.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub stopping_time: Option<u64>,
    pub state: DetectorState,
}

/// Per-step CSV trace: `t,y0..y{n-1},z0..z{n-1}`.
pub struct TraceWriter<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            header_written: false,
        }
    }

    pub fn record(&mut self, state: &DetectorState) -> io::Result<()> {
        if !self.header_written {
            let mut cols = vec!["t".to_string()];
            cols.extend((0..state.n()).map(|v| format!("y{v}")));
            cols.extend((0..state.n()).map(|v| format!("z{v}")));
            writeln!(self.out, "{}", cols.join(","))?;
            self.header_written = true;
        }
        write!(self.out, "{}", state.t)?;
        for v in state.y.iter().chain(&state.z) {
            write!(self.out, ",{v}")?;
        }
        writeln!(self.out)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
