use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::ChangeTime;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// τ_v = ∞ for every sensor.
    NoChange,
    /// τ_v = τ for every sensor.
    Synchronous { tau: u64 },
    /// τ_1 fixed; sensor `v ≥ 2` changes at `τ_1 + round(Exp(mean_v))`.
    /// `delay_means[k]` belongs to sensor `k + 2`; a zero mean means no delay.
    Asynchronous { tau1: u64, delay_means: Vec<f64> },
}

/// How change times are laid out across the sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScenario {
    kind: ScenarioKind,
    n: usize,
}

impl ChangeScenario {
    pub fn new(kind: ScenarioKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::usage("scenario needs at least one sensor"));
        }
        match &kind {
            ScenarioKind::NoChange => {}
            ScenarioKind::Synchronous { tau } if *tau == 0 => {
                return Err(Error::usage("change time must be at least 1"));
            }
            ScenarioKind::Synchronous { .. } => {}
            ScenarioKind::Asynchronous { tau1, delay_means } => {
                if *tau1 == 0 {
                    return Err(Error::usage("change time must be at least 1"));
                }
                if delay_means.len() != n - 1 {
                    return Err(Error::usage(format!(
                        "asynchronous scenario on {n} sensors needs {} delay means, got {}",
                        n - 1,
                        delay_means.len()
                    )));
                }
                if let Some(m) = delay_means.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
                    return Err(Error::usage(format!("delay means must be finite and >= 0, got {m}")));
                }
            }
        }
        Ok(Self { kind, n })
    }

    pub fn no_change(n: usize) -> Self {
        Self::new(ScenarioKind::NoChange, n).expect("n checked by caller")
    }

    pub fn synchronous(n: usize, tau: u64) -> Result<Self> {
        Self::new(ScenarioKind::Synchronous { tau }, n)
    }

    pub fn asynchronous(n: usize, tau1: u64, delay_means: Vec<f64>) -> Result<Self> {
        Self::new(ScenarioKind::Asynchronous { tau1, delay_means }, n)
    }

    pub fn kind(&self) -> &ScenarioKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Change time of the first sensor, the reference for detection delay.
    pub fn first_change(&self) -> ChangeTime {
        match self.kind {
            ScenarioKind::NoChange => ChangeTime::Never,
            ScenarioKind::Synchronous { tau } => ChangeTime::At(tau),
            ScenarioKind::Asynchronous { tau1, .. } => ChangeTime::At(tau1),
        }
    }

    /// Short label for reports, e.g. `async(1;25,200,200)`.
    pub fn label(&self) -> String {
        match &self.kind {
            ScenarioKind::NoChange => "no_change".into(),
            ScenarioKind::Synchronous { tau } => format!("sync({tau})"),
            ScenarioKind::Asynchronous { tau1, delay_means } => {
                let d: Vec<String> = delay_means.iter().map(|m| format!("{m}")).collect();
                format!("async({tau1};{})", d.join(","))
            }
        }
    }

    /// Draw one trial's change times. Only the asynchronous case consumes randomness.
    pub fn change_times<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ChangeTime> {
        match &self.kind {
            ScenarioKind::NoChange => vec![ChangeTime::Never; self.n],
            ScenarioKind::Synchronous { tau } => vec![ChangeTime::At(*tau); self.n],
            ScenarioKind::Asynchronous { tau1, delay_means } => {
                let mut out = Vec::with_capacity(self.n);
                out.push(ChangeTime::At(*tau1));
                for &mean in delay_means {
                    let delay = if mean == 0.0 {
                        0
                    } else {
                        let d: f64 = Exp::new(1.0 / mean).expect("positive rate").sample(rng);
                        d.round() as u64
                    };
                    out.push(ChangeTime::At(tau1 + delay));
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_layouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ChangeScenario::no_change(3).change_times(&mut rng), vec![ChangeTime::Never; 3]);
        assert_eq!(
            ChangeScenario::synchronous(2, 5).unwrap().change_times(&mut rng),
            vec![ChangeTime::At(5); 2]
        );
    }

    #[test]
    fn asynchronous_delays_have_configured_means() {
        let s = ChangeScenario::asynchronous(4, 1, vec![0.0, 25.0, 200.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 40_000;
        let mut sums = [0.0f64; 4];
        for _ in 0..trials {
            let taus = s.change_times(&mut rng);
            assert_eq!(taus[0], ChangeTime::At(1));
            assert_eq!(taus[1], ChangeTime::At(1));
            for (acc, tau) in sums.iter_mut().zip(&taus) {
                if let ChangeTime::At(t) = tau {
                    *acc += (*t - 1) as f64;
                }
            }
        }
        // Rounding to the nearest integer leaves the mean of Exp(m) within
        // about 1/12m of m; the tolerance is ~4 standard errors.
        let m25 = sums[2] / trials as f64;
        let m200 = sums[3] / trials as f64;
        assert!((m25 - 25.0).abs() < 4.0 * 25.0 / (trials as f64).sqrt(), "{m25}");
        assert!((m200 - 200.0).abs() < 4.0 * 200.0 / (trials as f64).sqrt(), "{m200}");
    }

    #[test]
    fn invalid_scenarios_rejected() {
        assert!(ChangeScenario::synchronous(4, 0).is_err());
        assert!(ChangeScenario::asynchronous(4, 1, vec![1.0]).is_err());
        assert!(ChangeScenario::asynchronous(2, 1, vec![-1.0]).is_err());
        assert!(ChangeScenario::new(ScenarioKind::NoChange, 0).is_err());
    }
}
