use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dcusum_core::bounds::{write_bound_curves, BoundInputs};
use dcusum_core::experiment::{
    calibrate_threshold, run_comparison, CalibrationOptions, CsvWriter, DetectorSpec, ExperimentConfig,
    DEFAULT_TOLERANCE, DEFAULT_T_MAX_FACTOR, PHASE_CALIBRATE,
};
use dcusum_core::network::ValidationReport;
use dcusum_core::{DetectorKind, LlrModel, SeedSplitter};
use serde_json::json;

use crate::config::{self, build_graph, build_weights, Kind, LoadedConfig};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{BoundsArgs, CompareArgs, RunArgs};

pub const DEFAULT_TRIALS: usize = 1000;
pub const CALIBRATION_CSV: &str = "calibration.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const BOUNDS_CSV: &str = "bounds.csv";

fn print_report(out: &mut dyn Write, title: &str, report: &ValidationReport) -> std::io::Result<()> {
    writeln!(out, "weights {title}:")?;
    for line in report.to_string().lines() {
        writeln!(out, "  {line}")?;
    }
    Ok(())
}

/// Print a PASS/FAIL line per check; exit 1 if any check fails.
pub fn validate(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, base, .. } = config::load(path)?;
    let mut ok = true;

    match cfg.model() {
        Ok(m) => {
            let mo = m.moments();
            writeln!(
                out,
                "PASS model: shift = {}, mu1 = {}, sigma1 = {}, mu2 = {}, sigma2 = {}",
                m.shift(),
                mo.mu1,
                mo.sigma1,
                mo.mu2,
                mo.sigma2
            )?;
        }
        Err(e) => {
            ok = false;
            writeln!(out, "FAIL model: {e}")?;
        }
    }

    let mut n = None;
    let graph = match cfg.graph.as_ref().map(|g| build_graph(g, &base)).transpose() {
        Ok(g) => g,
        Err(e) if e.code == crate::EXIT_PARSE => return Err(e),
        Err(e) => {
            writeln!(out, "FAIL graph: {e}")?;
            return Err(CliError::failure(e.message));
        }
    };
    if let Some(g) = &graph {
        writeln!(
            out,
            "PASS graph: {}, {} sensors, {} edges, connected",
            g.label,
            g.graph.n(),
            g.graph.edge_count()
        )?;
        n = Some(g.graph.n());
    }

    let mut networks = Vec::new();
    if let Some(w) = &cfg.weights {
        networks.push(("[weights]".to_string(), build_weights(w, graph.as_ref(), &base)));
    }
    for d in cfg.detectors.iter().filter(|d| d.kind == Kind::Consensus) {
        if d.graph.is_some() || d.weights.is_some() {
            networks.push((format!("detector {:?}", d.name), cfg.detector_weights(d, &base)));
        } else if cfg.weights.is_none() {
            return Err(CliError::parse(format!("detector {:?}: consensus needs a [weights] table", d.name)));
        }
    }
    for (title, candidate) in networks {
        match candidate {
            Ok(c) => {
                let report = c.report()?;
                print_report(out, &format!("{title} ({}, {})", c.graph.label, c.source.as_str()), &report)?;
                ok &= report.passed();
                n.get_or_insert(c.entries.nrows());
            }
            Err(e) if e.code == crate::EXIT_PARSE => return Err(e),
            Err(e) => {
                ok = false;
                writeln!(out, "FAIL {title}: {e}")?;
            }
        }
    }

    if cfg.scenario.is_some() {
        match n.map(|n| cfg.scenario(n)) {
            Some(Ok(s)) => writeln!(out, "PASS scenario: {}", s.label())?,
            Some(Err(e)) => {
                ok = false;
                writeln!(out, "FAIL scenario: {e}")?;
            }
            None => return Err(CliError::parse("cannot tell the number of sensors: add a [graph] section")),
        }
    }

    if ok {
        writeln!(out, "result: PASS")?;
        Ok(())
    } else {
        writeln!(out, "result: FAIL")?;
        Err(CliError::failure("validation failed"))
    }
}

/// Settings shared by `calibrate` and `compare` after applying overrides.
struct RunContext {
    loaded: LoadedConfig,
    model: LlrModel,
    n: usize,
    detectors: Vec<DetectorSpec>,
    seed: u64,
    trials: usize,
    targets: Vec<f64>,
    tolerance: f64,
    threads: Option<usize>,
}

impl RunContext {
    fn new(args: &RunArgs) -> Result<Self, CliError> {
        let loaded = config::load(&args.config)?;
        let cfg = &loaded.config;
        let exp = &cfg.experiment;
        let seed = args.seed.or(exp.seed).ok_or_else(|| {
            CliError::parse("no seed given: pass --seed or set `seed` in [experiment]; randomized runs never pick one")
        })?;
        let targets = if args.target_arl.is_empty() {
            exp.target_arl
                .as_ref()
                .map(|t| t.values())
                .ok_or_else(|| CliError::parse("no target ARL: pass --target-arl or set `target_arl` in [experiment]"))?
        } else {
            args.target_arl.clone()
        };
        if targets.is_empty() {
            return Err(CliError::parse("empty target ARL list"));
        }
        let model = cfg.model()?;
        let n = cfg.sensor_count(&loaded.base)?;
        let detectors = cfg
            .detectors(&loaded.base)?
            .into_iter()
            .map(|(label, topology, kind)| {
                if let DetectorKind::Consensus(w) = &kind {
                    if w.n() != n {
                        return Err(CliError::failure(format!(
                            "detector {label:?} has {} sensors, expected {n}",
                            w.n()
                        )));
                    }
                }
                Ok(DetectorSpec { label, topology, kind })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            model,
            n,
            detectors,
            seed,
            trials: args.trials.or(exp.trials).unwrap_or(DEFAULT_TRIALS),
            targets,
            tolerance: args.tolerance.or(exp.tolerance).unwrap_or(DEFAULT_TOLERANCE),
            threads: args.threads.or(exp.threads),
            loaded,
        })
    }

    fn manifest(&self, command: &str, args: &RunArgs, extra: serde_json::Value) -> RunManifest {
        let overrides = json!({
            "seed": self.seed,
            "trials": self.trials,
            "target_arl": self.targets,
            "tolerance": self.tolerance,
            "t_max": args.t_max,
            "extra": extra,
        });
        RunManifest::new(command, Some(&args.config), &self.loaded.bytes, Some(self.seed), overrides)
    }
}

/// Either stdout or a file in `--out`.
fn open_output<'a>(
    dir: Option<&Path>,
    name: &str,
    stdout: &'a mut dyn Write,
) -> Result<(Box<dyn Write + 'a>, Option<PathBuf>), CliError> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            let path = d.join(name);
            Ok((Box::new(BufWriter::new(File::create(&path)?)), Some(path)))
        }
        None => Ok((Box::new(stdout), None)),
    }
}

pub fn calibrate(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let ctx = RunContext::new(args)?;
    let calibrate_seed = SeedSplitter::new(ctx.seed).child(PHASE_CALIBRATE).master();
    let (sink, path) = open_output(args.out.as_deref(), CALIBRATION_CSV, out)?;
    let mut csv = CsvWriter::new(sink, false)?;
    for &target in &ctx.targets {
        for spec in &ctx.detectors {
            let mut opts = CalibrationOptions::new(target, ctx.trials, calibrate_seed);
            opts.tolerance = ctx.tolerance;
            opts.mc.threads = ctx.threads;
            if let Some(t) = args.t_max.or(ctx.loaded.config.experiment.arl_t_max) {
                opts.mc.t_max = t;
            }
            let c = calibrate_threshold(&spec.kind, &ctx.model, ctx.n, &opts)
                .map_err(|e| CliError::from(e).context(&format!("detector {:?}", spec.label)))?;
            writeln!(err, "{} ({}): b = {} for target {target}; {}", spec.label, spec.topology, c.threshold, c.arl)?;
            if c.arl.censoring_flagged() {
                writeln!(err, "warning: {} censored more than 1% of ARL runs", spec.label)?;
            }
            csv.write_report(&spec.label, &spec.topology, c.threshold, &c.arl, ctx.seed)?;
        }
    }
    csv.into_inner().flush()?;
    if let (Some(dir), Some(path)) = (args.out.as_deref(), path) {
        let mut m = ctx.manifest("calibrate", args, json!({}));
        m.outputs.push(path);
        m.write(dir)?;
    }
    Ok(())
}

pub fn compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let run = &args.run;
    let ctx = RunContext::new(run)?;
    let cfg = &ctx.loaded.config;
    let scenario = cfg.scenario(ctx.n)?;
    let max_target = ctx.targets.iter().cloned().fold(0.0, f64::max);
    let edd_t_max = run
        .t_max
        .or(cfg.experiment.t_max)
        .unwrap_or((max_target.max(1.0) * DEFAULT_T_MAX_FACTOR as f64).ceil() as u64);
    let experiment = ExperimentConfig {
        model: ctx.model,
        detectors: ctx.detectors.clone(),
        scenario: scenario.clone(),
        target_arls: ctx.targets.clone(),
        tolerance: ctx.tolerance,
        trials: ctx.trials,
        arl_t_max: cfg.experiment.arl_t_max,
        edd_t_max,
        seed: ctx.seed,
        threads: ctx.threads,
    };
    let rows = run_comparison(&experiment)?;

    let (sink, path) = open_output(run.out.as_deref(), COMPARISON_CSV, out)?;
    let mut csv = CsvWriter::new(sink, args.bounds)?;
    let moments = ctx.model.moments();
    for row in &rows {
        csv.write_row(row, &moments, ctx.n, ctx.seed)?;
        let (lo, hi) = row.edd.ci95();
        writeln!(
            err,
            "ARL {:>8}  {:<12} {:<8} b = {:<10.5} EDD = {:.3} [{:.3}, {:.3}]",
            row.target_arl, row.label, row.topology, row.threshold, row.edd.estimate, lo, hi
        )?;
        for (what, r) in [("ARL", &row.arl), ("EDD", &row.edd)] {
            if r.censoring_flagged() {
                writeln!(err, "warning: {} censored more than 1% of {what} runs", row.label)?;
            }
        }
    }
    csv.into_inner().flush()?;
    if let (Some(dir), Some(path)) = (run.out.as_deref(), path) {
        let mut m = ctx.manifest(
            "compare",
            run,
            json!({ "bounds": args.bounds, "edd_t_max": edd_t_max, "scenario": scenario.label() }),
        );
        m.outputs.push(path);
        m.notes.push("EDD is the stopping time with the first sensor changing at t = 1 (delays measured from tau1)".into());
        if args.bounds {
            m.notes.push("bound columns are asymptotic dominant terms with o(1) corrections set to zero".into());
        }
        m.write(dir)?;
    }
    Ok(())
}

pub fn bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.b_step > 0.0 && args.b_max >= args.b_min && args.b_min.is_finite() && args.b_max.is_finite()) {
        return Err(CliError::parse("grid needs b-step > 0 and finite b-min <= b-max"));
    }
    let loaded = args.config.as_deref().map(config::load).transpose()?;
    let model = match (args.shift, &loaded) {
        (Some(u), _) => Some(LlrModel::gaussian_shift(u)?),
        (None, Some(l)) => Some(l.config.model()?),
        (None, None) => None,
    };
    let moments = model.map(|m| m.moments());
    let pick = |flag: Option<f64>, from_model: Option<f64>, name: &str| {
        flag.or(from_model)
            .ok_or_else(|| CliError::parse(format!("missing --{name} (or --shift / --config)")))
    };
    let mu1 = pick(args.mu1, moments.map(|m| m.mu1), "mu1")?;
    let sigma1 = pick(args.sigma1, moments.map(|m| m.sigma1), "sigma1")?;
    let mu2 = pick(args.mu2, moments.map(|m| m.mu2), "mu2")?;
    let n = match (args.n, &loaded) {
        (Some(n), _) => n,
        (None, Some(l)) => l.config.sensor_count(&l.base)?,
        (None, None) => 1,
    };
    let lambda2 = match (args.lambda2, &loaded) {
        (Some(l), _) => l,
        (None, Some(l)) => match l.config.top_weights(&l.base)? {
            Some(c) => c.report()?.lambda2,
            None => 0.0,
        },
        (None, None) => 0.0,
    };
    let steps = ((args.b_max - args.b_min) / args.b_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| args.b_min + k as f64 * args.b_step).collect();
    let inputs = BoundInputs {
        b: args.b_min,
        n,
        mu1,
        sigma1,
        mu2,
        lambda2,
        gamma: args.gamma,
    };
    let csv = write_bound_curves(Vec::new(), &inputs, &grid)?;
    let (mut sink, path) = open_output(args.out.as_deref(), BOUNDS_CSV, out)?;
    sink.write_all(&csv)?;
    sink.flush()?;
    drop(sink);
    if let (Some(dir), Some(path)) = (args.out.as_deref(), path) {
        let overrides = json!({
            "b_min": args.b_min, "b_max": args.b_max, "b_step": args.b_step,
            "n": n, "mu1": mu1, "sigma1": sigma1, "mu2": mu2, "lambda2": lambda2, "gamma": args.gamma,
        });
        let bytes = loaded.as_ref().map(|l| l.bytes.clone()).unwrap_or_default();
        let mut m = RunManifest::new("bounds", args.config.as_deref(), &bytes, None, overrides);
        m.outputs.push(path);
        m.notes.push("asymptotic dominant terms with o(1) corrections set to zero".into());
        m.write(dir)?;
    }
    Ok(())
}
