//! The `hasprof` command line.

use std::io::Write;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hasprof_core::eval::cross_validate;
use hasprof_core::features::extract_samples;
use hasprof_core::learn::{permutation_importance, ForestModel, ForestParams, Learner};
use hasprof_core::sim::{simulate_has, CorpusConfig, ScenarioId, VbrPreset};
use hasprof_core::trace::{LabeledTrace, TraceMeta};
use hasprof_core::{Dataset, LabelIndex, ModelSpec, PacketRecord, StreamingExtractor, Task};

use crate::bench::benchmark;
use crate::config::{model_spec, RunConfig, ScriptFile};
use crate::corpus_io::{write_corpus, write_manifest, Manifest, ManifestEntry};
use crate::error::{io_err, Error, Result};
use crate::model_io::{load_model, save_model, SavedModel};
use crate::pcap::read_pcap;
use crate::report::{report_json_string, report_text};
use crate::trace_io::{read_dataset_csv, read_packet_csv, read_trace, write_dataset_csv, write_trace};

#[derive(Debug, Parser)]
#[command(name = "hasprof", version, about = "Profile adaptive streaming flows and their play-back buffer state")]
pub struct Cli {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labeled traces into a directory.
    Simulate(SimulateArgs),
    /// Turn labeled traces into a feature dataset CSV.
    Extract(ExtractArgs),
    /// Fit a model on a dataset CSV.
    Train(TrainArgs),
    /// Classify a trace second by second.
    Predict(PredictArgs),
    /// Cross-validate a model on a dataset CSV.
    Evaluate(EvaluateArgs),
    /// Rank features by forest permutation importance.
    Importance(ImportanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    Download,
    Web,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Low,
    Medium,
    High,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    /// HAS vs non-HAS.
    Flow,
    /// Play-back buffer state.
    Buffer,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Flow => Task::Service,
            TaskArg::Buffer => Task::Buffer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Forest,
    Tree,
    Knn,
}

impl ModelArg {
    fn name(self) -> &'static str {
        match self {
            ModelArg::Forest => "forest",
            ModelArg::Tree => "tree",
            ModelArg::Knn => "knn",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenarios to run; without this (and without --script) the corpus
    /// grid of the configuration is used.
    #[arg(long, value_enum)]
    pub scenario: Vec<ScenarioArg>,
    /// VBR presets of the scenario runs.
    #[arg(long, value_enum, default_value = "medium")]
    pub preset: Vec<PresetArg>,
    /// Repetitions per scenario and preset.
    #[arg(long)]
    pub reps: Option<u32>,
    /// Corpus seed; each trace derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run one session script file instead of the scenario grid.
    #[arg(long, conflicts_with = "scenario")]
    pub script: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Packet CSV files, or directories whose `*.csv` files are all used.
    /// Each needs a `.labels` file next to it.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Which labels become the class column.
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Dataset CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave out the scenario column.
    #[arg(long)]
    pub no_scenario: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier; defaults to the configured kind.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Forest size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// k of k-NN.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Forest seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Packet CSV, or a classic pcap when --client-ip is given.
    pub trace: PathBuf,
    /// Read `trace` as pcap with this client address.
    #[arg(long)]
    pub client_ip: Option<Ipv4Addr>,
    /// Append per-class vote fractions to each line.
    #[arg(long)]
    pub scores: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Classifier; defaults to the configured kind.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fold assignment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forest size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// k of k-NN.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Also time training and prediction.
    #[arg(long)]
    pub runtime: bool,
    /// Timing repetitions for --runtime.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Write the report as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Forest size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Forest and permutation seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs a parsed command line. Regular output goes to `out`, warnings to
/// `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, a, out),
        Command::Extract(a) => extract(&cfg, a, out, err),
        Command::Train(a) => train(&cfg, a, out),
        Command::Predict(a) => predict(a, out, err),
        Command::Evaluate(a) => evaluate(&cfg, a, out),
        Command::Importance(a) => importance(&cfg, a, out),
    }
}

fn w(out: &mut dyn Write, s: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(s).map_err(io_err(Path::new("<stdout>")))
}

fn simulate(cfg: &RunConfig, a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &a.script {
        let mut script = ScriptFile::load(path)?.to_script()?;
        if let Some(seed) = a.seed {
            script.seed = seed;
        }
        let trace = simulate_has(&script)?.trace;
        std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
        write_trace(&a.out, &trace)?;
        let id = trace.meta.trace_id.clone();
        let manifest = Manifest {
            seed: script.seed,
            traces: vec![ManifestEntry {
                scenario: script.scenario.clone(),
                seed: script.seed,
                packets: format!("{id}.csv"),
                labels: format!("{id}.labels"),
                n_packets: trace.packets.len(),
                trace_id: id,
            }],
        };
        write_manifest(&a.out, &manifest)?;
        return w(out, format_args!("wrote 1 trace to {}\n", a.out.display()));
    }
    let mut corpus = if a.scenario.is_empty() { cfg.corpus()? } else { grid(&a, cfg.corpus.seed) };
    if let Some(r) = a.reps {
        corpus.reps = r;
    }
    if let Some(s) = a.seed {
        corpus.seed = s;
    }
    let manifest = write_corpus(&corpus, &a.out)?;
    let n = manifest.traces.len();
    w(out, format_args!("wrote {n} trace{} to {}\n", if n == 1 { "" } else { "s" }, a.out.display()))
}

fn grid(a: &SimulateArgs, seed: u64) -> CorpusConfig {
    let reps = a.reps.unwrap_or(1);
    let all = a.scenario.contains(&ScenarioArg::All);
    let mut scenarios: Vec<ScenarioId> = Vec::new();
    for s in &a.scenario {
        let ids: &[ScenarioId] = match s {
            ScenarioArg::S1 => &[ScenarioId::S1],
            ScenarioArg::S2 => &[ScenarioId::S2],
            ScenarioArg::S3 => &[ScenarioId::S3],
            ScenarioArg::S4 => &[ScenarioId::S4],
            ScenarioArg::S5 => &[ScenarioId::S5],
            ScenarioArg::S6 => &[ScenarioId::S6],
            ScenarioArg::S7 => &[ScenarioId::S7],
            ScenarioArg::S8 => &[ScenarioId::S8],
            ScenarioArg::All => &ScenarioId::ALL,
            ScenarioArg::Download | ScenarioArg::Web => &[],
        };
        for id in ids {
            if !scenarios.contains(id) {
                scenarios.push(*id);
            }
        }
    }
    scenarios.sort();
    let mut presets: Vec<VbrPreset> = Vec::new();
    for p in &a.preset {
        let ps: &[VbrPreset] = match p {
            PresetArg::Low => &[VbrPreset::Low],
            PresetArg::Medium => &[VbrPreset::Medium],
            PresetArg::High => &[VbrPreset::High],
            PresetArg::All => &VbrPreset::ALL,
        };
        for p in ps {
            if !presets.contains(p) {
                presets.push(*p);
            }
        }
    }
    presets.sort();
    let has = |s: ScenarioArg| all || a.scenario.contains(&s);
    CorpusConfig {
        scenarios,
        presets,
        reps,
        downloads: if has(ScenarioArg::Download) { reps } else { 0 },
        webs: if has(ScenarioArg::Web) { reps } else { 0 },
        seed,
    }
}

/// Expands directories to their `*.csv` files, sorted by name.
fn trace_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Feature rows of one labeled trace.
pub fn trace_dataset(trace: &LabeledTrace, task: Task, cfg: &RunConfig, tag: bool) -> Result<Dataset> {
    let window = cfg.window()?;
    let index = LabelIndex::new(&trace.labels).map_err(|e| Error::Invalid(e.to_string()))?;
    let scenario = tag.then(|| trace.meta.scenario.clone().unwrap_or_else(|| trace.meta.trace_id.clone()));
    Ok(extract_samples(&trace.packets, trace.meta.client_ip, &index, task, &window, scenario.as_deref())?)
}

fn extract(cfg: &RunConfig, a: ExtractArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let task = Task::from(a.task);
    let window = cfg.window()?;
    let files = trace_files(&a.traces)?;
    if files.is_empty() {
        return Err(Error::Invalid("no trace files found".into()));
    }
    let mut ds = Dataset::new(window.feature_names(), task.class_names().iter().copied());
    for f in &files {
        let trace = read_trace(f)?;
        if trace.packets.is_empty() {
            let _ = writeln!(err, "warning: {} has no packets", f.display());
            continue;
        }
        let part = trace_dataset(&trace, task, cfg, !a.no_scenario)?;
        ds.append(&part)?;
    }
    if ds.is_empty() {
        let _ = writeln!(err, "warning: the dataset is empty");
    }
    write_dataset_csv(&a.out, &ds)?;
    let n = files.len();
    let plural = if n == 1 { "" } else { "s" };
    w(out, format_args!("wrote {} samples from {n} trace{plural} to {}\n", ds.n_rows(), a.out.display()))
}

fn spec_for(
    cfg: &RunConfig,
    model: Option<ModelArg>,
    trees: Option<usize>,
    neighbors: Option<usize>,
    seed: Option<u64>,
) -> Result<ModelSpec> {
    let mut m = cfg.model.clone();
    if let Some(t) = trees {
        m.n_trees = t;
    }
    if let Some(k) = neighbors {
        m.knn_k = k;
    }
    if let Some(s) = seed {
        m.seed = s;
    }
    let kind = model.map_or(m.kind.clone(), |k| k.name().to_string());
    model_spec(&kind, &m)
}

fn check_schema(ds: &Dataset, cfg: &RunConfig) -> Result<hasprof_core::WindowConfig> {
    let window = cfg.window()?;
    if window.feature_names() != ds.feature_names() {
        return Err(Error::Invalid(
            "dataset columns do not match the feature configuration; pass the --config used for extraction".into(),
        ));
    }
    Ok(window)
}

fn train(cfg: &RunConfig, a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_dataset_csv(&a.data)?;
    let window = check_schema(&ds, cfg)?;
    let spec = spec_for(cfg, a.model, a.trees, a.neighbors, a.seed)?;
    let model = spec.fit(&ds)?;
    let kind = model.kind().name();
    let saved = SavedModel::new(model, window, ds.feature_names().to_vec(), ds.class_names().to_vec())?;
    save_model(&a.out, &saved)?;
    w(out, format_args!("trained {kind} on {} samples, wrote {}\n", ds.n_rows(), a.out.display()))
}

fn read_packets(a: &PredictArgs, err: &mut dyn Write) -> Result<(TraceMeta, Vec<PacketRecord>)> {
    match a.client_ip {
        Some(ip) => {
            let p = read_pcap(&a.trace, ip)?;
            if p.skipped.total() > 0 {
                let _ = writeln!(err, "warning: {}: {}", a.trace.display(), p.skipped);
            }
            Ok((TraceMeta::new(ip, a.trace.display().to_string()), p.packets))
        }
        None => read_packet_csv(&a.trace),
    }
}

fn predict(a: PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let saved = load_model(&a.model)?;
    let (meta, packets) = read_packets(&a, err)?;
    let mut ex = StreamingExtractor::new(saved.window.clone(), meta.client_ip)?;
    let emit = |emissions: Vec<hasprof_core::features::Emission>, out: &mut dyn Write| -> Result<()> {
        for e in emissions {
            let (class, scores) = saved.model.predict_scores(&e.features.values)?;
            let mut line = format!("{} {} {}", e.features.t_w, e.flow, saved.class_names[class]);
            if a.scores {
                for s in scores {
                    line.push_str(&format!(" {s:.4}"));
                }
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(io_err(Path::new("<stdout>")))?;
        }
        Ok(())
    };
    for p in &packets {
        let done = ex.push(p)?;
        emit(done, out)?;
    }
    let rest = ex.finish();
    emit(rest, out)
}

fn evaluate(cfg: &RunConfig, a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_dataset_csv(&a.data)?;
    let spec = spec_for(cfg, a.model, a.trees, a.neighbors, None)?;
    let k = a.k.unwrap_or(cfg.eval.k);
    let seed = a.seed.unwrap_or(cfg.eval.seed);
    let mut report = cross_validate(&ds, &spec, k, seed)?;
    if a.runtime {
        report.runtime = Some(benchmark(&spec, &ds, a.repetitions.unwrap_or(cfg.eval.repetitions))?);
    }
    if let Some(path) = &a.json {
        std::fs::write(path, report_json_string(&report)).map_err(io_err(path))?;
    }
    w(out, format_args!("{}", report_text(&report)))
}

fn importance(cfg: &RunConfig, a: ImportanceArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_dataset_csv(&a.data)?;
    let params = ForestParams {
        n_trees: a.trees.unwrap_or(cfg.model.n_trees),
        feature_subsample: cfg.model.mtry,
        max_depth: cfg.model.max_depth,
        min_leaf: cfg.model.min_leaf,
        seed: a.seed.unwrap_or(cfg.model.seed),
        ..ForestParams::default()
    };
    let forest = ForestModel::train(&ds, &params)?;
    let imp = permutation_importance(&forest, &ds, params.seed)?;
    if imp.degenerate {
        w(out, format_args!("note: no feature raised the out-of-bag error; scores are raw\n"))?;
    }
    w(out, format_args!("{:>4}  {:<20} {:>8} {:>10}\n", "rank", "feature", "score", "raw"))?;
    for (rank, i) in imp.ranking().into_iter().enumerate() {
        w(
            out,
            format_args!(
                "{:>4}  {:<20} {:>8.4} {:>10.6}\n",
                rank + 1,
                ds.feature_names()[i],
                imp.scores[i],
                imp.raw[i]
            ),
        )?;
    }
    Ok(())
}
