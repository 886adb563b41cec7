// SPDX-License-Identifier: Apache-2.0

//! The `regclass` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 numerical
//! divergence. Errors are printed to stderr as one JSON object.
//!
//! Options that can also come from `--config FILE` (one `key = value` per
//! line, `#` comments) are resolved as flag, then file, then default.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::eval::{make_folds, FoldPlan};
use crate::features::write_feature_matrix;
use crate::gnn::{predict, read_header, train, Checkpoint, Example, MessageDirection, TrainConfig};
use crate::netlist::{normalize_to_aoi, CellLibrary};
use crate::pipeline::{
    config_hash, graph_report, load_corpus, postprocess, read_netlist, xval_report, MetricsReport,
    PipelineError, Prepared, XvalConfig, TOOL_VERSION,
};
use crate::relic::{classify_registers, RelicConfig};
use crate::synthgen::{build_corpus, builtin_archetypes, StateEncoding, MANIFEST_FILE};

#[derive(Parser, Debug)]
#[command(name = "regclass", version, about = "Register classification for gate-level netlists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also print a human-readable summary to stdout.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// in_neighbors or undirected.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    layer_norm: Option<bool>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    sage_layers: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// one_hot, binary or all.
    #[arg(long)]
    encoding: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic corpus.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of built-in archetypes to use (2..=10).
        #[arg(long, default_value_t = 10)]
        archetypes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the raw feature matrix of one netlist.
    Featurize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a manifest with one design held out.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        manifest: PathBuf,
        /// Design to hold out; ignored with --fold.
        #[arg(long)]
        holdout: Option<String>,
        /// Fold plan JSON (indices into the selected manifest entries).
        #[arg(long)]
        fold: Option<PathBuf>,
        /// Where to write the fold plan that was used.
        #[arg(long)]
        fold_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the registers of one netlist.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        netlist: PathBuf,
        /// Promote registers sharing a cyclic component with a predicted
        /// state register.
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fan-in similarity baseline.
    Relic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        netlist: PathBuf,
        /// P1, P2 or P3; explicit thresholds override preset values.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long)]
        t3: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        strict_pairs: bool,
        /// Per-register CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional register similarity matrix CSV.
        #[arg(long)]
        similarity: Option<PathBuf>,
    },
    /// Leave-one-design-out cross-validation.
    Xval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        manifest: PathBuf,
        /// Restrict to these held-out designs (repeatable).
        #[arg(long)]
        holdout: Vec<String>,
        /// Parallel folds.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a checkpoint header as JSON.
    CkptInspect {
        #[arg(long)]
        ckpt: PathBuf,
    },
}

/// A failed command: exit code plus a structured message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self { code: 1, kind: "usage", message: m.into() }
    }

    fn invalid(m: impl ToString) -> Self {
        Self { code: 2, kind: "invalid_input", message: m.to_string() }
    }

    fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.code, "message": self.message }).to_string()
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_numerical() {
            Self { code: 3, kind: "divergence", message: e.to_string() }
        } else {
            Self::invalid(e)
        }
    }
}

impl From<crate::gnn::GnnError> for CliError {
    fn from(e: crate::gnn::GnnError) -> Self {
        PipelineError::from(e).into()
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Parsed `key = value` configuration.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile(pub BTreeMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            map.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Flag, else file value, else `default`.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(s) => s.parse().map_err(|_| CliError::invalid(format!("config {key}: cannot parse {s:?}"))),
            None => Ok(default),
        }
    }
}

fn parse_direction(s: &str) -> Result<MessageDirection> {
    match s {
        "in_neighbors" => Ok(MessageDirection::InNeighbors),
        "undirected" => Ok(MessageDirection::Undirected),
        _ => Err(CliError::usage(format!("unknown direction {s:?}"))),
    }
}

fn parse_encodings(s: &str) -> Result<Vec<StateEncoding>> {
    match s {
        "one_hot" => Ok(vec![StateEncoding::OneHot]),
        "binary" => Ok(vec![StateEncoding::Binary]),
        "all" => Ok(vec![StateEncoding::OneHot, StateEncoding::Binary]),
        _ => Err(CliError::usage(format!("unknown encoding {s:?}"))),
    }
}

fn direction_name(d: MessageDirection) -> &'static str {
    match d {
        MessageDirection::InNeighbors => "in_neighbors",
        MessageDirection::Undirected => "undirected",
    }
}

struct Resolved {
    seed: u64,
    train: TrainConfig,
    val_fraction: f64,
    encodings: Vec<StateEncoding>,
}

fn resolve_train(common: &Common, flags: &TrainFlags, file: &ConfigFile) -> Result<Resolved> {
    let d = TrainConfig::default();
    let seed = file.pick(common.seed, "seed", d.seed)?;
    let direction = file.pick(flags.direction.clone(), "direction", direction_name(d.direction).to_string())?;
    let encoding = file.pick(flags.encoding.clone(), "encoding", "all".to_string())?;
    let train = TrainConfig {
        learning_rate: file.pick(flags.learning_rate, "learning_rate", d.learning_rate)?,
        dropout: file.pick(flags.dropout, "dropout", d.dropout)?,
        epochs: file.pick(flags.epochs, "epochs", d.epochs)?,
        seed,
        direction: parse_direction(&direction)?,
        layer_norm: file.pick(flags.layer_norm, "layer_norm", d.layer_norm)?,
        hidden: file.pick(flags.hidden, "hidden", d.hidden)?,
        sage_layers: file.pick(flags.sage_layers, "sage_layers", d.sage_layers)?,
        ..d
    };
    train.validate().map_err(CliError::invalid)?;
    Ok(Resolved {
        seed,
        train,
        val_fraction: file.pick(flags.val_fraction, "val_fraction", 0.2)?,
        encodings: parse_encodings(&encoding)?,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::invalid(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::invalid)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(CliError::invalid)
}

fn standard_library() -> Arc<CellLibrary> {
    Arc::new(CellLibrary::standard())
}

/// Output envelope shared by the JSON-writing commands.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool_version: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a serde_json::Value,
    #[serde(flatten)]
    body: T,
}

fn envelope<'a, T: Serialize>(seed: u64, config: &'a serde_json::Value, body: T) -> Envelope<'a, T> {
    Envelope { tool_version: TOOL_VERSION, seed, config_hash: config_hash(config), config, body }
}

fn cmd_gen(common: Common, archetypes: usize, out: PathBuf) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let seed = file.pick(common.seed, "seed", 0)?;
    let all = builtin_archetypes();
    if !(2..=all.len()).contains(&archetypes) {
        return Err(CliError::usage(format!("--archetypes must be in 2..={}", all.len())));
    }
    let m = build_corpus(&all[..archetypes], seed, &standard_library(), &out).map_err(CliError::invalid)?;
    if common.pretty {
        for e in &m.entries {
            println!("{:<16} v{} {:<8} {:>4} registers, {:>2} state", e.design, e.variant, e.encoding.as_str(), e.n_registers, e.n_state_registers);
        }
    }
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_featurize(common: Common, netlist: PathBuf, out: PathBuf) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let seed = file.pick(common.seed, "seed", 0)?;
    let n = read_netlist(&netlist, &standard_library())?;
    let p = Prepared::new(n, None, seed)?;
    let schema = crate::features::FeatureSchema::for_library(p.graph.library());
    let mut w = create(&out)?;
    write_feature_matrix(&mut w, &p.features, &schema.feature_names()).map_err(CliError::invalid)?;
    w.flush().map_err(CliError::invalid)?;
    if common.pretty {
        println!("{} nodes x {} features, {} registers", p.features.rows(), schema.len(), p.features.register_rows().len());
    }
    Ok(())
}

fn select(corpus: Vec<Prepared>, encodings: &[StateEncoding]) -> Vec<Prepared> {
    corpus
        .into_iter()
        .filter(|p| p.entry.as_ref().is_some_and(|e| encodings.contains(&e.encoding)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    common: Common,
    flags: TrainFlags,
    manifest: PathBuf,
    holdout: Option<String>,
    fold: Option<PathBuf>,
    fold_out: Option<PathBuf>,
    out: PathBuf,
) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let r = resolve_train(&common, &flags, &file)?;
    let (_, corpus) = load_corpus(&manifest, &standard_library(), r.seed)?;
    let corpus = select(corpus, &r.encodings);
    let entries: Vec<_> = corpus.iter().map(|p| p.entry.clone().expect("manifest entry")).collect();
    let plan: FoldPlan = match (fold, holdout.or_else(|| file.0.get("holdout").cloned())) {
        (Some(path), _) => {
            let bytes = std::fs::read(&path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            let plan: FoldPlan = serde_json::from_slice(&bytes).map_err(CliError::invalid)?;
            if plan.train.iter().chain(&plan.val).chain(&plan.test).any(|&i| i >= corpus.len()) {
                return Err(CliError::invalid("fold plan index out of range"));
            }
            plan
        }
        (None, Some(h)) => make_folds(&entries, &h, r.val_fraction, r.seed).map_err(CliError::invalid)?,
        (None, None) => return Err(CliError::usage("train needs --holdout or --fold")),
    };
    let ex = |idx: &[usize]| -> Vec<Example<'_>> { idx.iter().map(|&i| corpus[i].example()).collect() };
    let ckpt = train(&ex(&plan.train), &ex(&plan.val), &r.train)?;
    let mut w = create(&out)?;
    ckpt.save(&mut w)?;
    w.flush().map_err(CliError::invalid)?;
    if let Some(p) = fold_out {
        write_json(&p, &plan)?;
    }
    if common.pretty {
        println!(
            "trained on {} graphs ({} validation), best epoch {}, final train loss {:.4}",
            plan.train.len(),
            plan.val.len(),
            ckpt.best_epoch,
            ckpt.history.train_loss.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct InferOutput {
    netlist: String,
    predictions: crate::pipeline::Postprocessed,
    report: Option<MetricsReport>,
}

fn cmd_infer(common: Common, ckpt: PathBuf, netlist: PathBuf, complete: bool, out: PathBuf) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let seed = file.pick(common.seed, "seed", 0)?;
    let complete = complete || file.pick(None, "complete", false)?;
    let ck = {
        let f = File::open(&ckpt).map_err(|e| CliError::invalid(format!("{}: {e}", ckpt.display())))?;
        Checkpoint::load(&mut BufReader::new(f))?
    };
    let n = read_netlist(&netlist, &standard_library())?;
    let p = Prepared::new(n, None, seed)?;
    let raw = predict(&p.graph, &p.features, &ck)?;
    let post = postprocess(&p, raw, complete);
    let config = serde_json::json!({
        "checkpoint_config_hash": config_hash(&ck.config),
        "complete": complete,
        "netlist": netlist.display().to_string(),
    });
    let report = graph_report(&p, &post).map(|g| MetricsReport::new(config.clone(), seed, vec![g]));
    if common.pretty {
        let state = |v: &[crate::gnn::RegisterPrediction]| v.iter().filter(|x| x.class.is_state()).count();
        println!(
            "{} registers: {} predicted state, {} after rectification",
            post.raw.len(),
            state(&post.raw),
            state(&post.rectified)
        );
        if let Some(r) = &report {
            print!("{}", r.table());
        }
    }
    let body = InferOutput { netlist: p.netlist.name().to_string(), predictions: post, report };
    write_json(&out, &envelope(seed, &config, body))
}

#[allow(clippy::too_many_arguments)]
fn cmd_relic(
    common: Common,
    netlist: PathBuf,
    preset: Option<String>,
    t1: Option<f64>,
    t2: Option<f64>,
    t3: Option<usize>,
    depth: Option<usize>,
    strict_pairs: bool,
    out: PathBuf,
    similarity: Option<PathBuf>,
) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let seed = file.pick(common.seed, "seed", 0)?;
    let preset = preset.or_else(|| file.0.get("preset").cloned());
    let base = match &preset {
        Some(p) => RelicConfig::preset(p).map_err(|e| CliError::usage(e.to_string()))?,
        None => RelicConfig::P1,
    };
    let cfg = RelicConfig {
        t1: file.pick(t1, "t1", base.t1)?,
        t2: file.pick(t2, "t2", base.t2)?,
        t3: file.pick(t3, "t3", base.t3)?,
        depth: file.pick(depth, "depth", base.depth)?,
        strict_pairs: strict_pairs || file.pick(None, "strict_pairs", false)?,
    };
    cfg.validate().map_err(CliError::invalid)?;
    let lib = standard_library();
    let n = read_netlist(&netlist, &lib)?;
    let truth = n.labels().cloned();
    let norm = normalize_to_aoi(&n, &lib).map_err(CliError::invalid)?;
    let res = classify_registers(&norm, &cfg).map_err(CliError::invalid)?;
    let hash = config_hash(&cfg);
    let mut w = create(&out)?;
    let mut text = format!(
        "# tool_version={TOOL_VERSION} seed={seed} config_hash={hash} t1={} t2={} t3={} depth={} strict_pairs={}\n",
        cfg.t1, cfg.t2, cfg.t3, cfg.depth, cfg.strict_pairs
    );
    text.push_str("register,pair_count,class\n");
    for (r, c) in res.registers.iter().zip(&res.pair_counts) {
        let class = res.labels.get(r).expect("every register is labeled");
        text.push_str(&format!("{r},{c},{}\n", if class.is_state() { "state" } else { "data" }));
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::invalid)?;
    if let Some(path) = similarity {
        let mut w = create(&path)?;
        w.write_all(res.similarity_csv().as_bytes()).and_then(|_| w.flush()).map_err(CliError::invalid)?;
    }
    if common.pretty {
        let n_state = res.labels.count(crate::netlist::RegisterClass::State);
        println!("{} registers, {} classified state", res.registers.len(), n_state);
        if let Some(t) = truth {
            let mut c = crate::eval::ConfusionCounts::default();
            for r in &res.registers {
                if let (Some(a), Some(b)) = (t.get(r), res.labels.get(r)) {
                    c.add(a, b);
                }
            }
            let m = c.metrics();
            println!("sensitivity {:?} specificity {:?} balanced accuracy {:?}", m.sensitivity, m.specificity, m.balanced_accuracy);
        }
    }
    Ok(())
}

fn cmd_xval(
    common: Common,
    flags: TrainFlags,
    manifest: PathBuf,
    holdout: Vec<String>,
    jobs: Option<usize>,
    complete: bool,
    out: PathBuf,
) -> Result<()> {
    let file = ConfigFile::load(common.config.as_deref())?;
    let r = resolve_train(&common, &flags, &file)?;
    let jobs = file.pick(jobs, "jobs", 1)?.max(1);
    let holdouts = if holdout.is_empty() {
        file.0.get("holdout").map(|h| h.split(',').map(|s| s.trim().to_string()).collect()).unwrap_or_default()
    } else {
        holdout
    };
    let cfg = XvalConfig {
        train: r.train,
        val_fraction: r.val_fraction,
        holdouts,
        encodings: r.encodings,
        complete: complete || file.pick(None, "complete", false)?,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(CliError::invalid)?;
    let report = pool.install(|| -> Result<MetricsReport> {
        let (_, corpus) = load_corpus(&manifest, &standard_library(), r.seed)?;
        Ok(xval_report(&corpus, &cfg)?)
    })?;
    if common.pretty {
        print!("{}", report.table());
    }
    write_json(&out, &report)
}

fn cmd_ckpt_inspect(ckpt: PathBuf) -> Result<()> {
    let f = File::open(&ckpt).map_err(|e| CliError::invalid(format!("{}: {e}", ckpt.display())))?;
    let h = read_header(&mut BufReader::new(f))?;
    println!("{}", serde_json::to_string_pretty(&h).map_err(CliError::invalid)?);
    Ok(())
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.code;
        }
    };
    let result = match cli.command {
        Command::Gen { common, archetypes, out } => cmd_gen(common, archetypes, out),
        Command::Featurize { common, netlist, out } => cmd_featurize(common, netlist, out),
        Command::Train { common, train, manifest, holdout, fold, fold_out, out } => {
            cmd_train(common, train, manifest, holdout, fold, fold_out, out)
        }
        Command::Infer { common, ckpt, netlist, complete, out } => cmd_infer(common, ckpt, netlist, complete, out),
        Command::Relic { common, netlist, preset, t1, t2, t3, depth, strict_pairs, out, similarity } => {
            cmd_relic(common, netlist, preset, t1, t2, t3, depth, strict_pairs, out, similarity)
        }
        Command::Xval { common, train, manifest, holdout, jobs, complete, out } => {
            cmd_xval(common, train, manifest, holdout, jobs, complete, out)
        }
        Command::CkptInspect { ckpt } => cmd_ckpt_inspect(ckpt),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing_and_precedence() {
        let f = ConfigFile::parse("# comment\nepochs = 12\nlearning-rate=0.01 # trailing\n\n").unwrap();
        assert_eq!(f.pick(None, "epochs", 300usize).unwrap(), 12);
        assert_eq!(f.pick(Some(5usize), "epochs", 300).unwrap(), 5);
        assert_eq!(f.pick(None, "learning_rate", 0.001).unwrap(), 0.01);
        assert_eq!(f.pick(None, "dropout", 0.25).unwrap(), 0.25);
        assert!(ConfigFile::parse("novalue").is_err());
        assert_eq!(f.pick::<usize>(None, "learning_rate", 1).unwrap_err().code, 2);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["regclass", "bogus"]), 1);
        assert_eq!(run(["regclass", "gen", "--out", "/nonexistent", "--archetypes", "1"]), 1);
        assert_eq!(run(["regclass", "--help"]), 0);
    }

    #[test]
    fn validation_errors_exit_two() {
        assert_eq!(run(["regclass", "ckpt-inspect", "--ckpt", "/nonexistent/ckpt.bin"]), 2);
    }
}
