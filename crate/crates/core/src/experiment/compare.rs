//! Multi-detector comparisons at a common calibrated ARL.

use std::io::{self, Write};

use super::calibrate::{calibrate_threshold, Calibration, CalibrationOptions};
use super::engine::{estimate_edd, MonteCarlo};
use super::metrics::MetricsReport;
use super::scenario::ChangeScenario;
use crate::bounds::{self, BoundInputs};
use crate::detector::{Detector, DetectorKind};
use crate::error::{Error, Result};
use crate::model::{LlrModel, SeedSplitter};
use crate::stats::format_float;

/// Seed-splitter tags for the calibration and evaluation phases.
pub const PHASE_CALIBRATE: u64 = 1;
pub const PHASE_EVALUATE: u64 = 2;

/// A named detector in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub label: String,
    /// Topology description for reports, e.g. `line` or `K4`.
    pub topology: String,
    pub kind: DetectorKind,
}

/// A detector with its calibrated threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedDetector {
    pub spec: DetectorSpec,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub topology: String,
    pub kind: DetectorKind,
    pub threshold: f64,
    pub target_arl: f64,
    pub arl: MetricsReport,
    pub edd: MetricsReport,
    pub lambda2: Option<f64>,
}

/// Everything needed to reproduce one comparison experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: LlrModel,
    pub detectors: Vec<DetectorSpec>,
    pub scenario: ChangeScenario,
    pub target_arls: Vec<f64>,
    pub tolerance: f64,
    /// Trials for both calibration and EDD estimation.
    pub trials: usize,
    /// Censoring horizon for calibration; `None` means 20 × target.
    pub arl_t_max: Option<u64>,
    pub edd_t_max: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Estimate EDD for every calibrated detector on shared streams.
pub fn compare_detectors(
    entries: &[CalibratedDetector],
    model: &LlrModel,
    scenario: &ChangeScenario,
    mc: &MonteCarlo,
) -> Result<Vec<ComparisonRow>> {
    let Some(first) = entries.first() else {
        return Err(Error::usage("nothing to compare"));
    };
    let target = first.calibration.target_arl;
    if let Some(bad) = entries.iter().find(|e| e.calibration.target_arl != target) {
        return Err(Error::usage(format!(
            "detector {} is calibrated to ARL {} but {} is calibrated to {target}",
            bad.spec.label, bad.calibration.target_arl, first.spec.label
        )));
    }
    entries
        .iter()
        .map(|e| {
            let detector = Detector::new(e.spec.kind.clone(), e.calibration.threshold)?;
            let edd = estimate_edd(&detector, model, scenario, mc)?;
            Ok(ComparisonRow {
                label: e.spec.label.clone(),
                topology: e.spec.topology.clone(),
                kind: e.spec.kind.clone(),
                threshold: e.calibration.threshold,
                target_arl: target,
                arl: e.calibration.arl.clone(),
                edd,
                lambda2: match &e.spec.kind {
                    DetectorKind::Consensus(w) => Some(w.lambda2()),
                    _ => None,
                },
            })
        })
        .collect()
}

/// Calibrate every detector to each target ARL, then estimate EDD under the
/// configured scenario. Calibration and evaluation use independent streams
/// derived from the master seed; within each phase all detectors share streams.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Vec<ComparisonRow>> {
    if config.detectors.is_empty() {
        return Err(Error::usage("no detectors configured"));
    }
    if config.target_arls.is_empty() {
        return Err(Error::usage("no target ARL configured"));
    }
    let n = config.scenario.n();
    let seeds = SeedSplitter::new(config.seed);
    let calibrate_seed = seeds.child(PHASE_CALIBRATE).master();
    let evaluate = MonteCarlo::new(config.trials, config.edd_t_max, seeds.child(PHASE_EVALUATE).master())
        .with_threads(config.threads);

    let mut rows = Vec::new();
    for &target in &config.target_arls {
        let mut opts = CalibrationOptions::new(target, config.trials, calibrate_seed);
        opts.tolerance = config.tolerance;
        opts.mc.threads = config.threads;
        if let Some(t) = config.arl_t_max {
            opts.mc.t_max = t;
        }
        let calibrated = config
            .detectors
            .iter()
            .map(|spec| {
                Ok(CalibratedDetector {
                    spec: spec.clone(),
                    calibration: calibrate_threshold(&spec.kind, &config.model, n, &opts)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(compare_detectors(&calibrated, &config.model, &config.scenario, &evaluate)?);
    }
    Ok(rows)
}

/// Column layout shared by every experiment CSV.
pub const CSV_HEADER: [&str; 9] = [
    "detector", "topology", "b", "metric", "estimate", "std_error", "trials", "censored", "seed",
];
/// Extra columns appended when bound curves are overlaid.
pub const BOUND_COLUMNS: [&str; 3] = ["arl_lower_bound", "edd_upper_bound", "edd_given_arl_bound"];

pub struct CsvWriter<W: Write> {
    out: W,
    with_bounds: bool,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, with_bounds: bool) -> io::Result<Self> {
        let mut cols: Vec<&str> = CSV_HEADER.to_vec();
        if with_bounds {
            cols.extend(BOUND_COLUMNS);
        }
        writeln!(out, "{}", cols.join(","))?;
        Ok(Self { out, with_bounds })
    }

    /// One complete line without bound columns.
    pub fn write_report(
        &mut self,
        label: &str,
        topology: &str,
        threshold: f64,
        report: &MetricsReport,
        seed: u64,
    ) -> io::Result<()> {
        self.write_fields(label, topology, threshold, report, seed)?;
        if self.with_bounds {
            self.out.write_all(b",,,")?;
        }
        writeln!(self.out)
    }

    fn write_fields(
        &mut self,
        label: &str,
        topology: &str,
        threshold: f64,
        report: &MetricsReport,
        seed: u64,
    ) -> io::Result<()> {
        write!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(label),
            csv_field(topology),
            format_float(threshold),
            report.metric,
            format_float(report.estimate),
            format_float(report.std_error),
            report.trials,
            report.censored,
            seed
        )
    }

    /// ARL and EDD lines for one comparison row.
    pub fn write_row(&mut self, row: &ComparisonRow, moments: &crate::model::Moments, n: usize, seed: u64) -> io::Result<()> {
        for report in [&row.arl, &row.edd] {
            self.write_fields(&row.label, &row.topology, row.threshold, report, seed)?;
            if self.with_bounds {
                let (arl, edd, given) = overlay_bounds(row, moments, n);
                write!(self.out, ",{},{},{}", opt_num(arl), opt_num(edd), opt_num(given))?;
            }
            writeln!(self.out)?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Bound curves evaluated for a comparison row.
///
/// Consensus rows use their own λ₂ and threshold; the centralized row uses
/// λ₂ = 0 with the per-sensor threshold `b/n` (the K4 equivalent). One-shot
/// rows have no bound.
pub fn overlay_bounds(row: &ComparisonRow, m: &crate::model::Moments, n: usize) -> (Option<f64>, Option<f64>, Option<f64>) {
    let (b, lambda2) = match &row.kind {
        DetectorKind::Consensus(w) => (row.threshold, w.lambda2()),
        DetectorKind::Centralized => (row.threshold / n as f64, 0.0),
        DetectorKind::OneShot => return (None, None, None),
    };
    let inputs = BoundInputs {
        b,
        n,
        mu1: m.mu1,
        sigma1: m.sigma1,
        mu2: m.mu2,
        lambda2,
        gamma: Some(row.target_arl),
    };
    (
        bounds::arl_lower_bound(&inputs).ok(),
        bounds::edd_upper_bound(&inputs).ok(),
        bounds::edd_given_arl_bound(&inputs).ok(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::metrics::Metric;
    use crate::network::WeightMatrix;

    fn report(metric: Metric, estimate: f64) -> MetricsReport {
        MetricsReport {
            metric,
            estimate,
            std_error: 0.5,
            trials: 10,
            censored: 0,
            t_max: 100,
        }
    }

    fn entry(label: &str, target: f64) -> CalibratedDetector {
        CalibratedDetector {
            spec: DetectorSpec {
                label: label.into(),
                topology: "none".into(),
                kind: DetectorKind::OneShot,
            },
            calibration: Calibration {
                threshold: 2.0,
                target_arl: target,
                arl: report(Metric::Arl, target),
                iterations: 1,
            },
        }
    }

    #[test]
    fn mismatched_calibration_rejected() {
        let model = LlrModel::gaussian_shift(1.0).unwrap();
        let s = ChangeScenario::synchronous(2, 1).unwrap();
        let mc = MonteCarlo::new(10, 100, 1);
        let err = compare_detectors(&[entry("a", 100.0), entry("b", 200.0)], &model, &s, &mc).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert_eq!(compare_detectors(&[entry("a", 100.0), entry("b", 100.0)], &model, &s, &mc).unwrap().len(), 2);
    }

    #[test]
    fn csv_layout() {
        let row = ComparisonRow {
            label: "k4".into(),
            topology: "K4".into(),
            kind: DetectorKind::consensus(WeightMatrix::uniform(4).unwrap()),
            threshold: 2.5,
            target_arl: 100.0,
            arl: report(Metric::Arl, 101.0),
            edd: report(Metric::Edd, 7.25),
            lambda2: Some(0.0),
        };
        let m = LlrModel::gaussian_shift(1.0).unwrap().moments();
        let mut w = CsvWriter::new(Vec::new(), false).unwrap();
        w.write_row(&row, &m, 4, 42).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(
            text,
            "detector,topology,b,metric,estimate,std_error,trials,censored,seed\n\
             k4,K4,2.5,ARL,101,0.5,10,0,42\n\
             k4,K4,2.5,EDD,7.25,0.5,10,0,42\n"
        );
        let mut w = CsvWriter::new(Vec::new(), true).unwrap();
        w.write_row(&row, &m, 4, 42).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.ends_with(",arl_lower_bound,edd_upper_bound,edd_given_arl_bound"));
        let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields.len(), 12);
        assert_eq!(fields[10], "5");
    }

    #[test]
    fn single_sensor_detectors_agree() {
        let model = LlrModel::gaussian_shift(1.0).unwrap();
        let w = WeightMatrix::new(
            crate::network::SensorGraph::path(1).unwrap(),
            nalgebra::DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let specs = [
            ("consensus", DetectorKind::consensus(w)),
            ("one_shot", DetectorKind::OneShot),
            ("centralized", DetectorKind::Centralized),
        ]
        .map(|(l, k)| DetectorSpec {
            label: l.into(),
            topology: "single".into(),
            kind: k,
        });
        let config = ExperimentConfig {
            model,
            detectors: specs.to_vec(),
            scenario: ChangeScenario::synchronous(1, 1).unwrap(),
            target_arls: vec![50.0],
            tolerance: 0.05,
            trials: 200,
            arl_t_max: None,
            edd_t_max: 10_000,
            seed: 3,
            threads: None,
        };
        let rows = run_comparison(&config).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows[1..] {
            assert_eq!(r.threshold, rows[0].threshold);
            assert_eq!(r.arl, rows[0].arl);
            assert_eq!(r.edd, rows[0].edd);
        }
    }
}
