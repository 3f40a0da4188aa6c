//! Pre/post-change observation model and synthetic sensor streams.
//!
//! Observations are scalar. Before the change a sensor sees `N(0, 1)`, after
//! it sees `N(u, 1)`. The log-likelihood ratio is `L(x) = u·x − u²/2`, which
//! is itself Gaussian: `N(−u²/2, u²)` pre-change and `N(u²/2, u²)` post-change.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Mean and standard deviation of the LLR under both regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
}

/// Gaussian mean-shift change model with its LLR moments.
///
/// Detectors only consume [`LlrModel::llr`] and the moments, so other
/// sub-Gaussian families can be slotted in behind the same surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrModel {
    shift: f64,
    moments: Moments,
}

impl LlrModel {
    /// Model for `N(0,1) → N(shift,1)`. A zero or non-finite shift is rejected.
    pub fn gaussian_shift(shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::Model(format!("shift must be finite, got {shift}")));
        }
        if shift == 0.0 {
            return Err(Error::Model(
                "shift must be nonzero: pre- and post-change laws coincide".into(),
            ));
        }
        let half_sq = shift * shift / 2.0;
        Ok(Self {
            shift,
            moments: Moments {
                mu1: -half_sq,
                sigma1: shift.abs(),
                mu2: half_sq,
                sigma2: shift.abs(),
            },
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn moments(&self) -> Moments {
        self.moments
    }

    #[inline]
    pub fn llr(&self, x: f64) -> f64 {
        self.shift * x - self.shift * self.shift / 2.0
    }

    /// Mean of the observation law before (`false`) or after (`true`) the change.
    #[inline]
    pub fn observation_mean(&self, post_change: bool) -> f64 {
        if post_change {
            self.shift
        } else {
            0.0
        }
    }
}

/// When a sensor's observation law switches. `Never` is τ = ∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChangeTime {
    At(u64),
    Never,
}

impl ChangeTime {
    #[inline]
    pub fn is_post_change(self, t: u64) -> bool {
        match self {
            ChangeTime::At(tau) => t >= tau,
            ChangeTime::Never => false,
        }
    }
}

impl fmt::Display for ChangeTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChangeTime::At(t) => write!(f, "{t}"),
            ChangeTime::Never => f.write_str("inf"),
        }
    }
}

/// Deterministic seed derivation: `(master, domain, trial, sensor) → u64`.
///
/// Each derived value seeds an independent ChaCha8 generator, so a trial's
/// randomness depends only on its coordinates and never on which thread runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSplitter {
    master: u64,
}

/// Seed domains. Observation streams and scenario draws never share a generator.
pub mod domain {
    pub const OBSERVATIONS: u64 = 0x6f62_7365_7276;
    pub const SCENARIO: u64 = 0x7363_656e_6172;
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl SeedSplitter {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// A splitter for an independent phase of an experiment (e.g. calibration
    /// versus evaluation), so the phases never reuse streams.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            master: splitmix64(splitmix64(self.master) ^ splitmix64(tag.wrapping_add(0x5bd1_e995))),
        }
    }

    pub fn derive(&self, domain: u64, trial: u64, sensor: u64) -> u64 {
        let mut h = splitmix64(self.master);
        h = splitmix64(h ^ domain);
        h = splitmix64(h ^ trial);
        splitmix64(h ^ sensor.wrapping_mul(0x2545_f491_4f6c_dd1d))
    }

    pub fn rng(&self, domain: u64, trial: u64, sensor: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derive(domain, trial, sensor))
    }

    /// Observation streams for every sensor of one trial.
    pub fn streams(
        &self,
        model: &LlrModel,
        trial: u64,
        change_times: &[ChangeTime],
    ) -> Vec<ObservationStream> {
        change_times
            .iter()
            .enumerate()
            .map(|(v, &tau)| {
                ObservationStream::new(
                    *model,
                    v,
                    tau,
                    self.rng(domain::OBSERVATIONS, trial, v as u64),
                )
            })
            .collect()
    }
}

/// Sequential observations of one sensor: i.i.d. P₁ before its change time,
/// i.i.d. P₂ from the change time on.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    model: LlrModel,
    sensor_id: usize,
    change_time: ChangeTime,
    consumed: u64,
    rng: ChaCha8Rng,
}

impl ObservationStream {
    pub fn new(model: LlrModel, sensor_id: usize, change_time: ChangeTime, rng: ChaCha8Rng) -> Self {
        Self {
            model,
            sensor_id,
            change_time,
            consumed: 0,
            rng,
        }
    }

    pub fn from_seed(model: LlrModel, sensor_id: usize, change_time: ChangeTime, seed: u64) -> Self {
        Self::new(model, sensor_id, change_time, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn model(&self) -> &LlrModel {
        &self.model
    }

    pub fn sensor_id(&self) -> usize {
        self.sensor_id
    }

    pub fn change_time(&self) -> ChangeTime {
        self.change_time
    }

    /// Number of samples drawn so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    /// Draw `x_v^t`. Streams only advance in order: `t` must be `consumed() + 1`.
    pub fn sample(&mut self, t: u64) -> Result<f64> {
        if t != self.consumed + 1 {
            return Err(Error::usage(format!(
                "sensor {} stream is at step {}, cannot sample step {t}",
                self.sensor_id, self.consumed
            )));
        }
        Ok(self.next_sample())
    }

    /// Draw the next observation in sequence.
    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        self.consumed += 1;
        let noise: f64 = StandardNormal.sample(&mut self.rng);
        noise + self.model.observation_mean(self.change_time.is_post_change(self.consumed))
    }

    /// LLR of the next observation.
    #[inline]
    pub fn next_llr(&mut self) -> f64 {
        let x = self.next_sample();
        self.model.llr(x)
    }
}
