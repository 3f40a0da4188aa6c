//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! shift = 1.0
//!
//! [graph]
//! topology = "line"        # line | ring | complete | custom
//! n = 4
//! # edges = [[0, 1], [1, 2]]   or   edge_file = "graph.txt"
//!
//! [weights]
//! source = "inline"        # inline | file | max_degree | damped_max_degree | optimized | uniform
//! matrix = [["5/8", "3/8", 0, 0], ...]
//!
//! [[detectors]]
//! name = "line"
//! kind = "consensus"       # consensus | one_shot | centralized
//!
//! [scenario]
//! kind = "asynchronous"    # no_change | synchronous | asynchronous
//! tau = 1
//! delay_means = [25, 200, 200]
//!
//! [experiment]
//! trials = 5000
//! target_arl = [1000, 5000]
//! seed = 7
//! ```
//!
//! A detector may carry its own `[detectors.graph]` and `[detectors.weights]`
//! tables; otherwise it uses the top-level ones. Relative paths are resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use dcusum_core::experiment::{ChangeScenario, ScenarioKind};
use dcusum_core::network::{
    damped_max_degree_weights, graph_from_pattern, io, max_degree_entries, optimize_weights, validate_entries,
    ValidationReport, DEFAULT_ITERATIONS, DEFAULT_STEP,
};
use dcusum_core::{DetectorKind, LlrModel, SensorGraph, WeightMatrix};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub graph: Option<GraphSection>,
    pub weights: Option<WeightsSection>,
    #[serde(default)]
    pub detectors: Vec<DetectorSection>,
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[serde(alias = "path")]
    Line,
    Ring,
    Complete,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub topology: Option<Topology>,
    pub n: Option<usize>,
    pub edges: Option<Vec<[usize; 2]>>,
    pub edge_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Inline,
    File,
    MaxDegree,
    DampedMaxDegree,
    Optimized,
    Uniform,
}

impl WeightSource {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightSource::Inline => "inline",
            WeightSource::File => "file",
            WeightSource::MaxDegree => "max_degree",
            WeightSource::DampedMaxDegree => "damped_max_degree",
            WeightSource::Optimized => "optimized",
            WeightSource::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Rows(Vec<Vec<Entry>>),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub source: WeightSource,
    pub matrix: Option<MatrixValue>,
    pub path: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Consensus,
    #[serde(alias = "one-shot")]
    OneShot,
    Centralized,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub name: String,
    pub kind: Kind,
    /// Topology label in reports; defaults to the graph's.
    pub topology: Option<String>,
    pub graph: Option<GraphSection>,
    pub weights: Option<WeightsSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    NoChange,
    Synchronous,
    Asynchronous,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioName,
    pub tau: Option<u64>,
    pub delay_means: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: Option<usize>,
    /// EDD censoring horizon.
    pub t_max: Option<u64>,
    /// ARL censoring horizon during calibration.
    pub arl_t_max: Option<u64>,
    pub target_arl: Option<OneOrMany>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// A parsed config with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub base: PathBuf,
    pub bytes: Vec<u8>,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::parse(format!("{} is not UTF-8: {e}", path.display())))?;
    let config = parse(text).map_err(|e| CliError::parse(format!("{}: {}", path.display(), e.message)))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base, bytes })
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    toml::from_str(text).map_err(|e| CliError::parse(e.to_string()))
}

/// A graph together with the label used in reports.
#[derive(Debug, Clone)]
pub struct LabelledGraph {
    pub graph: SensorGraph,
    pub label: String,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_text(base: &Path, p: &Path) -> Result<String, CliError> {
    let full = resolve(base, p);
    std::fs::read_to_string(&full).map_err(|e| CliError::parse(format!("cannot read {}: {e}", full.display())))
}

pub fn build_graph(section: &GraphSection, base: &Path) -> Result<LabelledGraph, CliError> {
    let explicit = section.edges.is_some() || section.edge_file.is_some();
    let topology = section
        .topology
        .unwrap_or(if explicit { Topology::Custom } else { Topology::Complete });
    let need_n = || {
        section
            .n
            .ok_or_else(|| CliError::parse("graph: field `n` is required for this topology"))
    };
    let (graph, label) = match topology {
        Topology::Line => (SensorGraph::path(need_n()?), "line".to_string()),
        Topology::Ring => (SensorGraph::ring(need_n()?), "ring".to_string()),
        Topology::Complete => {
            let n = need_n()?;
            (SensorGraph::complete(n), format!("K{n}"))
        }
        Topology::Custom => {
            let (implied, edges) = match (&section.edges, &section.edge_file) {
                (Some(_), Some(_)) => return Err(CliError::parse("graph: give either `edges` or `edge_file`, not both")),
                (Some(e), None) => {
                    let edges: Vec<(usize, usize)> = e.iter().map(|[a, b]| (*a, *b)).collect();
                    let implied = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
                    (implied, edges)
                }
                (None, Some(p)) => io::parse_edge_list(&read_text(base, p)?).map_err(CliError::from)?,
                (None, None) => return Err(CliError::parse("graph: custom topology needs `edges` or `edge_file`")),
            };
            let n = section.n.unwrap_or(implied);
            (SensorGraph::new(n, edges), "custom".to_string())
        }
    };
    Ok(LabelledGraph {
        graph: graph.map_err(CliError::from)?,
        label,
    })
}

fn inline_matrix(value: &MatrixValue) -> Result<DMatrix<f64>, CliError> {
    match value {
        MatrixValue::Text(text) => io::parse_dense_matrix(text).map_err(CliError::from),
        MatrixValue::Rows(rows) => {
            let n = rows.len();
            if n == 0 {
                return Err(CliError::parse("weights: empty matrix"));
            }
            let mut m = DMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(CliError::parse(format!(
                        "weights: matrix row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                for (j, e) in row.iter().enumerate() {
                    m[(i, j)] = match e {
                        Entry::Number(x) => *x,
                        Entry::Text(s) => io::parse_entry(s)
                            .map_err(|msg| CliError::parse(format!("weights: matrix[{i}][{j}]: {msg}")))?,
                    };
                }
            }
            Ok(m)
        }
    }
}

/// Candidate consensus entries before they are checked.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub graph: LabelledGraph,
    pub entries: DMatrix<f64>,
    pub source: WeightSource,
}

impl Candidate {
    pub fn report(&self) -> Result<ValidationReport, CliError> {
        validate_entries(&self.graph.graph, &self.entries).map_err(CliError::from)
    }

    pub fn into_matrix(self) -> Result<WeightMatrix, CliError> {
        WeightMatrix::new(self.graph.graph, self.entries).map_err(CliError::from)
    }
}

/// Consensus entries from a weights table, on `graph` when one is given.
pub fn build_weights(
    section: &WeightsSection,
    graph: Option<&LabelledGraph>,
    base: &Path,
) -> Result<Candidate, CliError> {
    let need_graph = || {
        graph.cloned().ok_or_else(|| {
            CliError::parse(format!("weights: source {:?} needs a [graph] section", section.source.as_str()))
        })
    };
    let (graph, entries) = match section.source {
        WeightSource::Inline | WeightSource::File => {
            let entries = if section.source == WeightSource::Inline {
                let value = section
                    .matrix
                    .as_ref()
                    .ok_or_else(|| CliError::parse("weights: inline source needs `matrix`"))?;
                inline_matrix(value)?
            } else {
                let p = section
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::parse("weights: file source needs `path`"))?;
                io::parse_dense_matrix(&read_text(base, p)?).map_err(CliError::from)?
            };
            let graph = match graph {
                Some(g) => g.clone(),
                None => LabelledGraph {
                    graph: graph_from_pattern(&entries).map_err(CliError::from)?,
                    label: if is_line_pattern(&entries) {
                        "line".to_string()
                    } else {
                        "custom".to_string()
                    },
                },
            };
            (graph, entries)
        }
        WeightSource::MaxDegree => {
            let g = need_graph()?;
            let m = max_degree_entries(&g.graph);
            (g, m)
        }
        WeightSource::DampedMaxDegree => {
            let g = need_graph()?;
            let m = damped_max_degree_weights(&g.graph).map_err(CliError::from)?.entries().clone();
            (g, m)
        }
        WeightSource::Optimized => {
            let g = need_graph()?;
            let w = optimize_weights(
                &g.graph,
                section.iterations.unwrap_or(DEFAULT_ITERATIONS),
                section.step.unwrap_or(DEFAULT_STEP),
            )
            .map_err(CliError::from)?;
            (g, w.entries().clone())
        }
        WeightSource::Uniform => {
            let g = need_graph()?;
            let n = g.graph.n();
            (g, DMatrix::from_element(n, n, 1.0 / n as f64))
        }
    };
    Ok(Candidate {
        graph,
        entries,
        source: section.source,
    })
}

fn is_line_pattern(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| (i.abs_diff(j) <= 1) == (m[(i, j)] != 0.0 || m[(j, i)] != 0.0 || i == j)))
}

impl Config {
    pub fn model(&self) -> Result<LlrModel, CliError> {
        LlrModel::gaussian_shift(self.model.shift).map_err(CliError::from)
    }

    pub fn top_graph(&self, base: &Path) -> Result<Option<LabelledGraph>, CliError> {
        self.graph.as_ref().map(|g| build_graph(g, base)).transpose()
    }

    /// Candidate weights of the top-level table.
    pub fn top_weights(&self, base: &Path) -> Result<Option<Candidate>, CliError> {
        let graph = self.top_graph(base)?;
        self.weights
            .as_ref()
            .map(|w| build_weights(w, graph.as_ref(), base))
            .transpose()
    }

    /// Candidate weights for a consensus detector.
    pub fn detector_weights(&self, d: &DetectorSection, base: &Path) -> Result<Candidate, CliError> {
        let graph = match &d.graph {
            Some(g) => Some(build_graph(g, base)?),
            None => self.top_graph(base)?,
        };
        let section = d.weights.as_ref().or(self.weights.as_ref()).ok_or_else(|| {
            CliError::parse(format!("detector {:?}: consensus needs a [weights] table", d.name))
        })?;
        build_weights(section, graph.as_ref(), base)
    }

    /// Sensor count implied by the graph, the weights, or a detector's network.
    pub fn sensor_count(&self, base: &Path) -> Result<usize, CliError> {
        let mut counts = Vec::new();
        if let Some(g) = self.top_graph(base)? {
            counts.push(("[graph]".to_string(), g.graph.n()));
        }
        if let Some(w) = self.top_weights(base)? {
            counts.push(("[weights]".to_string(), w.entries.nrows()));
        }
        for d in &self.detectors {
            if d.kind == Kind::Consensus && (d.graph.is_some() || d.weights.is_some()) {
                counts.push((format!("detector {:?}", d.name), self.detector_weights(d, base)?.entries.nrows()));
            }
        }
        let Some((_, n)) = counts.first().cloned() else {
            return Err(CliError::parse("cannot tell the number of sensors: add a [graph] section"));
        };
        if let Some((who, m)) = counts.iter().find(|(_, m)| *m != n) {
            return Err(CliError::failure(format!(
                "{who} has {m} sensors but {} has {n}",
                counts[0].0
            )));
        }
        Ok(n)
    }

    /// Build every configured detector. Consensus matrices must pass (i) to (iv).
    pub fn detectors(&self, base: &Path) -> Result<Vec<(String, String, DetectorKind)>, CliError> {
        if self.detectors.is_empty() {
            return Err(CliError::parse("no [[detectors]] configured"));
        }
        let top_label = self.top_graph(base)?.map(|g| g.label);
        self.detectors
            .iter()
            .map(|d| {
                let (kind, graph_label) = match d.kind {
                    Kind::Consensus => {
                        let candidate = self.detector_weights(d, base)?;
                        let label = candidate.graph.label.clone();
                        let w = candidate.into_matrix().map_err(|e| e.context(&format!("detector {:?}", d.name)))?;
                        (DetectorKind::consensus(w), Some(label))
                    }
                    Kind::OneShot => (DetectorKind::OneShot, None),
                    Kind::Centralized => (DetectorKind::Centralized, None),
                };
                let topology = d
                    .topology
                    .clone()
                    .or_else(|| match d.kind {
                        Kind::Consensus => graph_label,
                        Kind::OneShot => Some("local".to_string()),
                        Kind::Centralized => Some("fusion".to_string()),
                    })
                    .or_else(|| top_label.clone())
                    .unwrap_or_default();
                Ok((d.name.clone(), topology, kind))
            })
            .collect()
    }

    pub fn scenario(&self, n: usize) -> Result<ChangeScenario, CliError> {
        let s = self
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::parse("no [scenario] section"))?;
        let tau = s.tau.unwrap_or(1);
        let kind = match s.kind {
            ScenarioName::NoChange => ScenarioKind::NoChange,
            ScenarioName::Synchronous => ScenarioKind::Synchronous { tau },
            ScenarioName::Asynchronous => ScenarioKind::Asynchronous {
                tau1: tau,
                delay_means: s
                    .delay_means
                    .clone()
                    .ok_or_else(|| CliError::parse("scenario: asynchronous needs `delay_means`"))?,
            },
        };
        ChangeScenario::new(kind, n).map_err(CliError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"
[model]
shift = 1.0

[weights]
source = "inline"
matrix = [["5/8", "3/8", 0, 0], ["3/8", 0.5, "1/8", 0], [0, "1/8", 0.5, "3/8"], [0, 0, "3/8", "5/8"]]

[[detectors]]
name = "line"
kind = "consensus"

[[detectors]]
name = "k4"
kind = "consensus"
graph = { topology = "complete", n = 4 }
weights = { source = "uniform" }

[[detectors]]
name = "one-shot"
kind = "one_shot"
"#;

    #[test]
    fn parses_inline_fractions_and_overrides() {
        let cfg = parse(LINE).unwrap();
        let base = Path::new(".");
        assert_eq!(cfg.sensor_count(base).unwrap(), 4);
        let dets = cfg.detectors(base).unwrap();
        assert_eq!(dets[0].1, "line");
        assert!((dets[0].2.clone().name() == "consensus"));
        assert_eq!(dets[1].1, "K4");
        assert_eq!(dets[2].1, "local");
        let w = cfg.top_weights(base).unwrap().unwrap();
        assert_eq!(w.entries[(0, 1)], 0.375);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse("[model]\nshift = 1\nshfit = 2\n").unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_PARSE);
        assert!(err.message.contains("shfit"), "{}", err.message);
    }

    #[test]
    fn disconnected_custom_graph_fails_validation() {
        let cfg = parse("[model]\nshift = 1\n[graph]\nedges = [[0, 1], [2, 3]]\n").unwrap();
        let err = cfg.top_graph(Path::new(".")).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_FAILURE);
        assert!(err.message.contains("graph not connected"));
    }

    #[test]
    fn scenario_needs_matching_delays() {
        let cfg = parse("[model]\nshift = 1\n[scenario]\nkind = \"asynchronous\"\ndelay_means = [1.0]\n").unwrap();
        assert!(cfg.scenario(4).is_err());
        assert!(cfg.scenario(2).is_ok());
    }
}
