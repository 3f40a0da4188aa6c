use std::fmt;

use crate::stats::mean_and_variance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Arl,
    Edd,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Arl => "ARL",
            Metric::Edd => "EDD",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Censoring above this fraction of trials flags the report.
pub const CENSORING_FLAG_FRACTION: f64 = 0.01;

/// Monte Carlo estimate of a run-length metric.
///
/// Censored trials contribute `t_max`, which biases the estimate downwards;
/// [`MetricsReport::is_lower_bound`] says when that happened.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub metric: Metric,
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub censored: usize,
    pub t_max: u64,
}

impl MetricsReport {
    /// Summarise per-trial stopping times (`None` = censored at `t_max`).
    pub fn from_stopping_times(metric: Metric, times: &[Option<u64>], t_max: u64) -> Self {
        let values: Vec<f64> = times.iter().map(|t| t.unwrap_or(t_max) as f64).collect();
        let censored = times.iter().filter(|t| t.is_none()).count();
        let (mean, var) = mean_and_variance(&values);
        Self {
            metric,
            estimate: mean,
            std_error: (var / values.len() as f64).sqrt(),
            trials: values.len(),
            censored,
            t_max,
        }
    }

    pub fn is_lower_bound(&self) -> bool {
        self.censored > 0
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    pub fn censoring_flagged(&self) -> bool {
        self.censored_fraction() > CENSORING_FLAG_FRACTION
    }

    /// Normal-approximation 95% confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.std_error;
        (self.estimate - h, self.estimate + h)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {:.3} ± {:.3} ({} trials, {} censored at {})",
            self.metric, self.estimate, self.std_error, self.trials, self.censored, self.t_max
        )?;
        if self.is_lower_bound() {
            f.write_str(" [lower bound]")?;
        }
        Ok(())
    }
}
