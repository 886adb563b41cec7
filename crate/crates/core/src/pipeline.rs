// SPDX-License-Identifier: Apache-2.0

//! End-to-end plumbing: loading corpora, featurizing graphs, evaluating
//! predictions and leave-one-design-out cross-validation.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{macro_average, make_folds, ConfusionCounts, FoldError, FoldPlan, Metrics};
use crate::features::{extract_features, FeatureError, FeatureMatrix, FeatureSchema};
use crate::gnn::{predict, train, Checkpoint, Example, GnnError, RegisterPrediction, TrainConfig};
use crate::graph::{BetweennessMode, CircuitGraph, SccPartition};
use crate::netlist::{parse_json_netlist, parse_verilog_subset, CellLibrary, Netlist, NetlistError, RegisterClass};
use crate::postprocess::{expand_completeness, rectify, Flip};
use crate::synthgen::{CorpusItem, CorpusManifest, ManifestEntry, StateEncoding};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Netlist { path: String, source: NetlistError },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Gnn(e) if e.is_numerical())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// SHA-256 of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Reads a JSON netlist, or structural Verilog when the extension is `.v`.
pub fn read_netlist(path: &Path, lib: &Arc<CellLibrary>) -> Result<Netlist, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let wrap = |source| PipelineError::Netlist { path: path.display().to_string(), source };
    if path.extension().is_some_and(|e| e == "v") {
        let text = String::from_utf8(bytes).map_err(|e| io_err(path, e))?;
        parse_verilog_subset(&text, lib).map_err(wrap)
    } else {
        parse_json_netlist(&bytes, lib).map_err(wrap)
    }
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| io_err(path, e))
}

/// A netlist with everything the classifier needs.
pub struct Prepared {
    pub entry: Option<ManifestEntry>,
    pub netlist: Netlist,
    pub graph: CircuitGraph,
    pub scc: SccPartition,
    /// Unstandardized.
    pub features: FeatureMatrix,
}

impl Prepared {
    pub fn new(netlist: Netlist, entry: Option<ManifestEntry>, seed: u64) -> Result<Self, PipelineError> {
        let graph = CircuitGraph::build(&netlist);
        let scc = graph.scc();
        let c = graph.centralities(BetweennessMode::auto(graph.node_count(), seed));
        let schema = FeatureSchema::for_library(graph.library());
        let features = extract_features(&graph, &c, &schema, netlist.labels())?;
        Ok(Self { entry, netlist, graph, scc, features })
    }

    pub fn example(&self) -> Example<'_> {
        Example { graph: &self.graph, features: &self.features }
    }

    /// Ground truth per register node, in node order.
    pub fn truth(&self) -> Option<Vec<RegisterClass>> {
        let labels = self.netlist.labels()?;
        self.graph.registers().map(|v| labels.get(&self.graph.node(v).name)).collect()
    }
}

pub fn prepare_items(items: Vec<CorpusItem>, seed: u64) -> Result<Vec<Prepared>, PipelineError> {
    items
        .into_iter()
        .map(|i| Prepared::new(i.netlist, Some(i.entry), seed))
        .collect()
}

/// Loads and prepares every graph listed in the manifest at `path`.
pub fn load_corpus(
    path: &Path,
    lib: &Arc<CellLibrary>,
    seed: u64,
) -> Result<(CorpusManifest, Vec<Prepared>), PipelineError> {
    let manifest = read_manifest(path)?;
    let prepared = manifest
        .entries
        .iter()
        .map(|e| {
            let n = read_netlist(&manifest.resolve(path, e), lib)?;
            Prepared::new(n, Some(e.clone()), seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, prepared))
}

/// Predictions before and after structural post-processing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Postprocessed {
    pub raw: Vec<RegisterPrediction>,
    pub rectified: Vec<RegisterPrediction>,
    pub rectify_flips: Vec<Flip>,
    /// Present when completeness expansion was requested; applied to the
    /// rectified predictions.
    pub completed: Option<Vec<RegisterPrediction>>,
    pub complete_flips: Vec<Flip>,
}

pub fn postprocess(p: &Prepared, raw: Vec<RegisterPrediction>, complete: bool) -> Postprocessed {
    let (rectified, rectify_flips) = rectify(&p.graph, &p.scc, &raw);
    let (completed, complete_flips) = if complete {
        let (c, f) = expand_completeness(&p.graph, &p.scc, &rectified);
        (Some(c), f)
    } else {
        (None, Vec::new())
    };
    Postprocessed { raw, rectified, rectify_flips, completed, complete_flips }
}

fn counts(truth: &[RegisterClass], preds: &[RegisterPrediction]) -> ConfusionCounts {
    let p: Vec<RegisterClass> = preds.iter().map(|x| x.class).collect();
    ConfusionCounts::tally(truth, &p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub design: String,
    pub variant: u8,
    pub encoding: StateEncoding,
    pub raw: ConfusionCounts,
    pub rectified: ConfusionCounts,
    pub completed: Option<ConfusionCounts>,
    pub rectify_flips: usize,
    pub complete_flips: usize,
}

pub fn graph_report(p: &Prepared, post: &Postprocessed) -> Option<GraphReport> {
    let truth = p.truth()?;
    let e = p.entry.clone().unwrap_or_else(|| ManifestEntry {
        design: p.netlist.name().to_string(),
        variant: 0,
        encoding: StateEncoding::OneHot,
        path: String::new(),
        n_registers: truth.len(),
        n_state_registers: truth.iter().filter(|c| c.is_state()).count(),
    });
    Some(GraphReport {
        design: e.design,
        variant: e.variant,
        encoding: e.encoding,
        raw: counts(&truth, &post.raw),
        rectified: counts(&truth, &post.rectified),
        completed: post.completed.as_ref().map(|c| counts(&truth, c)),
        rectify_flips: post.rectify_flips.len(),
        complete_flips: post.complete_flips.len(),
    })
}

/// Metrics of one stage of post-processing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub raw: Metrics,
    pub rectified: Metrics,
    pub completed: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub design: String,
    pub encoding: StateEncoding,
    /// Averages over the design's variants.
    pub metrics: StageMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub graphs: Vec<GraphReport>,
    pub designs: Vec<DesignReport>,
    /// Average over `designs`.
    pub corpus: StageMetrics,
}

fn average<'a>(items: impl Iterator<Item = &'a StageMetrics> + Clone) -> StageMetrics {
    let raw: Vec<Metrics> = items.clone().map(|m| m.raw).collect();
    let rect: Vec<Metrics> = items.clone().map(|m| m.rectified).collect();
    let comp: Option<Vec<Metrics>> = items.map(|m| m.completed).collect();
    StageMetrics {
        raw: macro_average(&raw).0,
        rectified: macro_average(&rect).0,
        completed: comp.map(|c| macro_average(&c).0),
    }
}

impl MetricsReport {
    /// Aggregates per-graph counts: each graph gets its own metrics, designs
    /// average over their variants, the corpus averages over designs.
    pub fn new(config: serde_json::Value, seed: u64, graphs: Vec<GraphReport>) -> Self {
        let per_graph: Vec<StageMetrics> = graphs
            .iter()
            .map(|g| StageMetrics {
                raw: g.raw.metrics(),
                rectified: g.rectified.metrics(),
                completed: g.completed.map(|c| c.metrics()),
            })
            .collect();
        let mut keys: Vec<(String, StateEncoding)> =
            graphs.iter().map(|g| (g.design.clone(), g.encoding)).collect();
        keys.sort();
        keys.dedup();
        let designs: Vec<DesignReport> = keys
            .into_iter()
            .map(|(design, encoding)| {
                let sel = graphs
                    .iter()
                    .zip(&per_graph)
                    .filter(|(g, _)| g.design == design && g.encoding == encoding)
                    .map(|(_, m)| m);
                DesignReport { metrics: average(sel), design, encoding }
            })
            .collect();
        let corpus = average(designs.iter().map(|d| &d.metrics));
        Self {
            tool_version: TOOL_VERSION.into(),
            seed,
            config_hash: config_hash(&config),
            config,
            graphs,
            designs,
            corpus,
        }
    }

    pub fn design(&self, name: &str, encoding: StateEncoding) -> Option<&DesignReport> {
        self.designs.iter().find(|d| d.design == name && d.encoding == encoding)
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let pct = |x: Option<f64>| x.map_or("   -  ".to_string(), |v| format!("{:6.2}", 100.0 * v));
        let mut s = format!(
            "{:<24} {:<8} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}\n",
            "design", "encoding", "sens", "spec", "bacc", "sens*", "spec*", "bacc*"
        );
        let mut row = |name: &str, enc: &str, m: &StageMetrics| {
            s.push_str(&format!(
                "{:<24} {:<8} {} {} {} | {} {} {}\n",
                name,
                enc,
                pct(m.raw.sensitivity),
                pct(m.raw.specificity),
                pct(m.raw.balanced_accuracy),
                pct(m.rectified.sensitivity),
                pct(m.rectified.specificity),
                pct(m.rectified.balanced_accuracy),
            ));
        };
        for d in &self.designs {
            row(&d.design, d.encoding.as_str(), &d.metrics);
        }
        row("corpus", "all", &self.corpus);
        s.push_str("(* after rectification)\n");
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XvalConfig {
    pub train: TrainConfig,
    pub val_fraction: f64,
    /// Designs to hold out; all designs when empty.
    pub holdouts: Vec<String>,
    pub encodings: Vec<StateEncoding>,
    pub complete: bool,
}

impl Default for XvalConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            val_fraction: 0.2,
            holdouts: Vec::new(),
            encodings: vec![StateEncoding::OneHot, StateEncoding::Binary],
            complete: false,
        }
    }
}

/// One trained and evaluated fold.
pub struct FoldOutcome {
    pub encoding: StateEncoding,
    pub plan: FoldPlan,
    pub checkpoint: Checkpoint,
    pub graphs: Vec<GraphReport>,
}

/// Trains on the plan's train/val graphs of `corpus` and evaluates its test
/// graphs. Indices in `plan` refer to `corpus`.
pub fn run_fold(
    corpus: &[&Prepared],
    plan: &FoldPlan,
    cfg: &TrainConfig,
    complete: bool,
) -> Result<(Checkpoint, Vec<GraphReport>), PipelineError> {
    let train_ex: Vec<Example<'_>> = plan.train.iter().map(|&i| corpus[i].example()).collect();
    let val_ex: Vec<Example<'_>> = plan.val.iter().map(|&i| corpus[i].example()).collect();
    let ckpt = train(&train_ex, &val_ex, cfg)?;
    let mut graphs = Vec::with_capacity(plan.test.len());
    for &i in &plan.test {
        let p = corpus[i];
        let raw = predict(&p.graph, &p.features, &ckpt)?;
        let post = postprocess(p, raw, complete);
        graphs.extend(graph_report(p, &post));
    }
    Ok((ckpt, graphs))
}

/// Leave-one-design-out cross-validation, separately per encoding. Folds
/// run in parallel on the current rayon pool; results are in encoding, then
/// design order.
pub fn cross_validate(corpus: &[Prepared], cfg: &XvalConfig) -> Result<Vec<FoldOutcome>, PipelineError> {
    let mut jobs = Vec::new();
    for &enc in &cfg.encodings {
        let subset: Vec<&Prepared> =
            corpus.iter().filter(|p| p.entry.as_ref().is_some_and(|e| e.encoding == enc)).collect();
        if subset.is_empty() {
            continue;
        }
        let entries: Vec<ManifestEntry> = subset.iter().map(|p| p.entry.clone().expect("filtered")).collect();
        let mut designs: Vec<String> = entries.iter().map(|e| e.design.clone()).collect();
        designs.sort();
        designs.dedup();
        let holdouts = if cfg.holdouts.is_empty() { designs } else { cfg.holdouts.clone() };
        for h in holdouts {
            let plan = make_folds(&entries, &h, cfg.val_fraction, cfg.train.seed)?;
            jobs.push((enc, subset.clone(), plan));
        }
    }
    if jobs.is_empty() {
        return Err(PipelineError::Invalid("no graphs with manifest entries to cross-validate".into()));
    }
    jobs.into_par_iter()
        .map(|(encoding, subset, plan)| {
            let (checkpoint, graphs) = run_fold(&subset, &plan, &cfg.train, cfg.complete)?;
            Ok(FoldOutcome { encoding, plan, checkpoint, graphs })
        })
        .collect()
}

/// [`cross_validate`] and the aggregated report.
pub fn xval_report(corpus: &[Prepared], cfg: &XvalConfig) -> Result<MetricsReport, PipelineError> {
    let folds = cross_validate(corpus, cfg)?;
    let graphs = folds.into_iter().flat_map(|f| f.graphs).collect();
    let config = serde_json::to_value(cfg).expect("config serializes");
    Ok(MetricsReport::new(config, cfg.train.seed, graphs))
}
