//! Run configuration, single runs, parameter sweeps and report output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmsc::{self, BmscParams, IterationRecord};
use crate::cluster::{self, DbscanParams, MeanShiftParams, NOISE};
use crate::encode::{self, Configuration, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gteval::{self, GroundTruth, GroundTruthReport};
use crate::ingest::MonolithGraph;
use crate::lexicon::{normalize_raw, StopList, TermBag};
use crate::matrix::pairwise_distances;
use crate::metrics::{self, Decomposition, MetricsReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Bmsc,
    #[serde(alias = "meanshift")]
    MeanShift,
    Dbscan,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bmsc" => Ok(Algorithm::Bmsc),
            "meanshift" | "mean_shift" | "mean-shift" => Ok(Algorithm::MeanShift),
            "dbscan" => Ok(Algorithm::Dbscan),
            other => Err(Error::InvalidParams(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Bmsc => "bmsc",
            Algorithm::MeanShift => "meanshift",
            Algorithm::Dbscan => "dbscan",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Eps,
    /// Multiplier on the estimated bandwidth.
    Bandwidth,
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::Eps => "eps",
            SweepParam::Bandwidth => "bandwidth",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(SweepParam::Eps),
            "bandwidth" => Ok(SweepParam::Bandwidth),
            other => Err(Error::InvalidParams(format!("cannot sweep `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl SweepSpec {
    /// eps from 0 to 1 in steps of 0.05.
    pub fn default_eps() -> Self {
        SweepSpec {
            param: SweepParam::Eps,
            start: 0.0,
            end: 1.0,
            step: 0.05,
        }
    }

    /// Bandwidth multipliers 0.5, 0.6, ..., 1.5.
    pub fn default_bandwidth() -> Self {
        SweepSpec {
            param: SweepParam::Bandwidth,
            start: 0.5,
            end: 1.5,
            step: 0.1,
        }
    }

    pub fn default_for(param: SweepParam) -> Self {
        match param {
            SweepParam::Eps => Self::default_eps(),
            SweepParam::Bandwidth => Self::default_bandwidth(),
        }
    }

    /// `start + i * step` up to `end`, with a small tolerance so that the
    /// end point survives rounding.
    pub fn values(&self) -> Result<Vec<f64>> {
        let ok = self.start.is_finite() && self.end.is_finite() && self.step.is_finite();
        if !ok || self.step <= 0.0 || self.end < self.start {
            return Err(Error::InvalidParams(format!(
                "invalid sweep range {}..{} step {}",
                self.start, self.end, self.step
            )));
        }
        let steps = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=steps).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Everything one run needs besides the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub configuration: Configuration,
    pub algorithm: Algorithm,
    /// Shared by all algorithms: `eps`, `min_pts` and `quantile` also drive
    /// the standalone DBSCAN and Mean Shift paths. `bmsc.seed` is replaced
    /// by `seed`.
    pub bmsc: BmscParams,
    /// Fixed bandwidth for the standalone Mean Shift path; estimated when unset.
    pub bandwidth: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            configuration: Configuration::DEFAULT,
            algorithm: Algorithm::Bmsc,
            bmsc: BmscParams::default(),
            bandwidth: None,
            sweep: None,
            out: None,
            seed: BmscParams::default().seed,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Malformed(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn params(&self) -> BmscParams {
        BmscParams {
            seed: self.seed,
            ..self.bmsc.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if let Some(b) = self.bandwidth {
            MeanShiftParams::new(b)?;
        }
        if let Some(s) = &self.sweep {
            s.values()?;
            check_sweep_applies(self.algorithm, s.param)?;
        }
        Ok(())
    }
}

fn check_sweep_applies(algorithm: Algorithm, param: SweepParam) -> Result<()> {
    match (algorithm, param) {
        (Algorithm::MeanShift, SweepParam::Eps) | (Algorithm::Dbscan, SweepParam::Bandwidth) => {
            Err(Error::InvalidParams(format!("{algorithm} does not use {param}")))
        }
        _ => Ok(()),
    }
}

/// Normalized term bags of every class.
pub fn class_bags(graph: &MonolithGraph, stop: &StopList) -> Vec<TermBag> {
    graph
        .classes()
        .iter()
        .map(|c| normalize_raw(&c.terms, stop))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub decomposition: Decomposition,
    pub metrics: MetricsReport,
    pub ground_truth: Option<GroundTruthReport>,
    /// Per-iteration records; empty for the standalone algorithms.
    pub log: Vec<IterationRecord>,
    /// False when the iteration cap was hit.
    pub converged: bool,
}

impl RunOutput {
    /// Writes `decomposition.json`, `metrics.json`, `run_log.jsonl` and,
    /// with a ground truth, `ground_truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.decomposition.save(&dir.join("decomposition.json"))?;
        write(&dir.join("metrics.json"), self.metrics.to_json() + "\n")?;
        let mut log = String::new();
        for r in &self.log {
            log.push_str(&serde_json::to_string(r).expect("records serialize"));
            log.push('\n');
        }
        write(&dir.join("run_log.jsonl"), log)?;
        if let Some(gt) = &self.ground_truth {
            write(&dir.join("ground_truth.json"), gt.to_json() + "\n")?;
        }
        Ok(())
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The encoded inputs shared by every run over one graph.
pub struct Pipeline<'a> {
    pub graph: &'a MonolithGraph,
    pub bags: Vec<TermBag>,
    pub features: FeatureMatrix,
}

impl<'a> Pipeline<'a> {
    pub fn new(graph: &'a MonolithGraph, stop: &StopList, configuration: Configuration) -> Result<Self> {
        let bags = class_bags(graph, stop);
        let features = encode::encode(graph, &bags, configuration)?;
        Ok(Pipeline { graph, bags, features })
    }

    pub fn cluster(&self, config: &RunConfig) -> Result<(Decomposition, Vec<IterationRecord>, bool)> {
        let params = config.params();
        match config.algorithm {
            Algorithm::Bmsc => {
                let out = bmsc::decompose(self.graph, &self.features, &self.bags, &params)?;
                Ok((out.decomposition, out.log, out.converged))
            }
            Algorithm::MeanShift => {
                let groups = mean_shift_groups(&self.features, &params, config.bandwidth)?;
                Ok((Decomposition::from_groups(self.graph, groups), Vec::new(), true))
            }
            Algorithm::Dbscan => {
                let groups = dbscan_groups(&self.features, &params)?;
                Ok((Decomposition::from_groups(self.graph, groups), Vec::new(), true))
            }
        }
    }

    pub fn run(&self, config: &RunConfig, truth: Option<&GroundTruth>) -> Result<RunOutput> {
        let (decomposition, log, converged) = self.cluster(config)?;
        let metrics = metrics::summarize(&decomposition, self.graph)?;
        let ground_truth = truth.map(|t| gteval::evaluate(&decomposition, t)).transpose()?;
        Ok(RunOutput {
            decomposition,
            metrics,
            ground_truth,
            log,
            converged,
        })
    }
}

/// Encodes, clusters and evaluates once.
pub fn run_once(
    config: &RunConfig,
    graph: &MonolithGraph,
    stop: &StopList,
    truth: Option<&GroundTruth>,
) -> Result<RunOutput> {
    config.validate()?;
    Pipeline::new(graph, stop, config.configuration)?.run(config, truth)
}

/// Bandwidth the standalone Mean Shift path would use before scaling.
fn base_bandwidth(features: &FeatureMatrix, params: &BmscParams, fixed: Option<f64>) -> Result<Option<f64>> {
    if let Some(b) = fixed {
        return Ok(Some(b));
    }
    match cluster::estimate_bandwidth(&features.rows, params.quantile) {
        Ok(b) => Ok(Some(b)),
        Err(Error::TooFewPoints { .. } | Error::AllPointsIdentical) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean_shift_groups(features: &FeatureMatrix, params: &BmscParams, fixed: Option<f64>) -> Result<Vec<Vec<usize>>> {
    let Some(base) = base_bandwidth(features, params, fixed)? else {
        return Ok(vec![(0..features.len()).collect()]);
    };
    let r = cluster::mean_shift(&features.rows, &MeanShiftParams::new(base * params.bandwidth_scale)?)?;
    Ok((0..r.modes.len()).map(|m| r.members(m)).collect())
}

fn dbscan_groups(features: &FeatureMatrix, params: &BmscParams) -> Result<Vec<Vec<usize>>> {
    let d = pairwise_distances(&features.rows);
    let eps = match params.eps {
        Some(e) => e,
        None if d.rows() > params.min_pts => cluster::suggest_eps(&d, params.min_pts)?.eps,
        None => 0.0,
    };
    let labels = cluster::dbscan_dist(&d, &DbscanParams::new(eps, params.min_pts)?)?;
    let mut groups = labels.clusters();
    groups.extend(
        labels
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == NOISE)
            .map(|(i, _)| vec![i]),
    );
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub metrics: MetricsReport,
    pub decomposition: Decomposition,
    pub converged: bool,
}

pub const SWEEP_HEADER: &str = "param,value,sm,icp,ifn,ned,count,largest";

/// One run per sweep value, all with the same seed. The sweep range comes
/// from `config.sweep`, or the default for `param` when that is unset.
pub fn sweep(config: &RunConfig, graph: &MonolithGraph, stop: &StopList, param: Option<SweepParam>) -> Result<Vec<SweepRow>> {
    let spec = match (&config.sweep, param) {
        (Some(s), None) => s.clone(),
        (Some(s), Some(p)) if s.param == p => s.clone(),
        (_, Some(p)) => SweepSpec::default_for(p),
        (None, None) => return Err(Error::InvalidParams("no sweep parameter given".into())),
    };
    check_sweep_applies(config.algorithm, spec.param)?;
    let values = spec.values()?;
    let base = RunConfig {
        sweep: None,
        ..config.clone()
    };
    base.validate()?;
    let pipeline = Pipeline::new(graph, stop, base.configuration)?;
    values
        .par_iter()
        .map(|&value| {
            let mut c = base.clone();
            match spec.param {
                SweepParam::Eps => c.bmsc.eps = Some(value),
                SweepParam::Bandwidth => c.bmsc.bandwidth_scale = config.bmsc.bandwidth_scale * value,
            }
            let out = pipeline.run(&c, None)?;
            Ok(SweepRow {
                param: spec.param,
                value,
                metrics: out.metrics,
                decomposition: out.decomposition,
                converged: out.converged,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.param, fmt_value(r.value), r.metrics.csv_fields());
    }
    s
}

/// Sweep values printed without float noise such as `0.15000000000000002`.
fn fmt_value(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub configuration: Configuration,
    pub algorithm: Algorithm,
    pub output: RunOutput,
}

pub const COMPARE_HEADER: &str = "configuration,algorithm,sm,icp,ifn,ned,count,largest,precision";

/// Runs every configuration with every algorithm in `algorithms`.
pub fn compare(
    config: &RunConfig,
    graph: &MonolithGraph,
    stop: &StopList,
    algorithms: &[Algorithm],
    truth: Option<&GroundTruth>,
) -> Result<Vec<CompareRow>> {
    let jobs: Vec<(Configuration, Algorithm)> = Configuration::all()
        .flat_map(|c| algorithms.iter().map(move |&a| (c, a)))
        .collect();
    jobs.par_iter()
        .map(|&(configuration, algorithm)| {
            let c = RunConfig {
                configuration,
                algorithm,
                sweep: None,
                ..config.clone()
            };
            Ok(CompareRow {
                configuration,
                algorithm,
                output: run_once(&c, graph, stop, truth)?,
            })
        })
        .collect()
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for r in rows {
        let precision = r
            .output
            .ground_truth
            .as_ref()
            .map_or(String::new(), |g| g.precision.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.configuration,
            r.algorithm,
            r.output.metrics.csv_fields(),
            precision
        );
    }
    s
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz text with one `cluster_` subgraph per microservice and every
/// call edge labelled with its frequency. Classes outside the decomposition
/// are drawn at the top level.
pub fn export_dot(decomp: &Decomposition, graph: &MonolithGraph) -> Result<String> {
    let labels = decomp.labels(graph)?;
    let mut s = String::from("digraph decomposition {\n  node [shape=box];\n");
    for (k, m) in decomp.microservices.iter().enumerate() {
        let _ = writeln!(s, "  subgraph cluster_{k} {{\n    label={};", dot_id(&m.name));
        for c in &m.classes {
            let _ = writeln!(s, "    {};", dot_id(c));
        }
        s.push_str("  }\n");
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_none() {
            let _ = writeln!(s, "  {};", dot_id(&graph.class(i).id));
        }
    }
    for e in graph.edges() {
        let _ = writeln!(
            s,
            "  {} -> {} [label=\"{}\"];",
            dot_id(&graph.class(e.caller).id),
            dot_id(&graph.class(e.callee).id),
            e.frequency
        );
    }
    s.push_str("}\n");
    Ok(s)
}
