//! Subcommands behind the `mgcn` binary.
//!
//! Each command writes a `run_manifest.txt` into its output directory. The
//! manifest lists the resolved configuration and is itself accepted by
//! `--config`, so a run can be repeated from its manifest alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mgcn::config::parse_key_values;
use mgcn::eval::{
    dimension_sweep, evaluate, reports_to_tsv, ExperimentPlan, ExperimentReport, Method, Scores,
};
use mgcn::mlgraph::{
    generate_synthetic, graph_digest, load_graph, save_graph, split_labels, SyntheticSpec,
};
use mgcn::model::write_embeddings;
use mgcn::train::{train, OptimizerKind, TrainOutcome};
use mgcn::{Error, MultiLayerGraph, Result, TrainConfig};

pub const MANIFEST_FILE: &str = "run_manifest.txt";
pub const HISTORY_FILE: &str = "history.tsv";
pub const SCORES_FILE: &str = "scores.tsv";
pub const REPORT_FILE: &str = "report.tsv";
pub const DEFAULT_RATIO: f64 = 0.2;

/// Manifest keys that describe a run rather than configure one.
const METADATA_KEYS: [&str; 5] = [
    "command",
    "tool_version",
    "dataset",
    "dataset_digest",
    "artifacts",
];

#[derive(Debug, Parser)]
#[command(
    name = "mgcn",
    version,
    about = "Multi-layer graph convolutional embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic planted-partition dataset.
    Generate {
        /// key=value synthetic spec file
        spec: PathBuf,
        out_dir: PathBuf,
    },
    /// Train once and export embeddings, loss history and held-out scores.
    Train(TrainArgs),
    /// Repeated train/score runs over ratios, methods and dimensions.
    Eval(EvalArgs),
}

/// Training options shared by `train` and `eval`. Flags override the
/// config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    /// key=value config file (a previous run_manifest.txt works too)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Drop between-layer pairs from the reconstruction loss.
    #[arg(long)]
    pub no_between_edges: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// plain-gd or adam
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Print the loss every N epochs to stderr (0 = never).
    #[arg(long)]
    pub log_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    /// Fraction of labeled nodes used for training.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comma-separated: mgcn, gcn-no-cross, unsup+logreg
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Embedding dimensions to sweep; defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

/// Process exit status for an error: 2 usage or configuration, 3 file
/// access or malformed input files, 4 numeric failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Bounds { .. } => 3,
        Error::NonFinite(_) | Error::Divergence { .. } => 4,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out_dir } => cmd_generate(&spec, &out_dir).map(|_| ()),
        Command::Train(args) => {
            let run = cmd_train(&args)?;
            println!(
                "final {}",
                run.outcome
                    .history
                    .records
                    .last()
                    .map_or(String::new(), |r| r.loss.to_string())
            );
            match &run.scores {
                Some(s) => println!(
                    "held-out micro_f1={:.4} macro_f1={:.4} n_test={}",
                    s.micro_f1, s.macro_f1, s.n_test
                ),
                None => println!("no held-out labeled nodes; scores skipped"),
            }
            println!("wrote {}", args.out_dir.display());
            Ok(())
        }
        Command::Eval(args) => {
            let reports = cmd_eval(&args)?;
            print!("{}", reports_to_tsv(&reports));
            Ok(())
        }
    }
}

/// Ordered `key=value` record of one invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub entries: Vec<(String, String)>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("tool_version", env!("CARGO_PKG_VERSION"));
        m
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Appends every line of a `key=value` rendering.
    fn extend_text(&mut self, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.push(k, v);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# mgcn run manifest v1\n");
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Generates the dataset described by `spec_path` into `out_dir` and
/// prints node and edge counts per stored pair.
pub fn cmd_generate(spec_path: &Path, out_dir: &Path) -> Result<MultiLayerGraph> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec = SyntheticSpec::from_text(&text)?;
    let graph = generate_synthetic(&spec)?;
    create_dir(out_dir)?;
    let files = save_graph(&graph, out_dir)?;

    let mut manifest = RunManifest::new("generate");
    manifest.extend_text(&spec.to_text());
    manifest.push("dataset_digest", graph_digest(&graph));
    manifest.push("artifacts", file_names(&files));
    manifest.write(out_dir)?;

    for (&(k, l), a) in &graph.relations {
        println!(
            "pair ({},{}): {}x{} nodes, {} stored entries",
            k + 1,
            l + 1,
            graph.layer_sizes[k],
            graph.layer_sizes[l],
            a.nnz()
        );
    }
    Ok(graph)
}

fn file_names(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(",")
}

/// A config file split into training fields and run-level extras.
fn read_config(
    path: Option<&Path>,
    allowed_extras: &[&str],
) -> Result<(TrainConfig, BTreeMap<String, String>)> {
    let mut cfg = TrainConfig::default();
    let mut extras = BTreeMap::new();
    let Some(path) = path else {
        return Ok((cfg, extras));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (_, key, value) in parse_key_values(&text)? {
        if METADATA_KEYS.contains(&key.as_str()) {
            continue;
        }
        if allowed_extras.contains(&key.as_str()) {
            extras.insert(key, value);
        } else {
            cfg.set(&key, &value)?;
        }
    }
    Ok((cfg, extras))
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.dim {
            cfg.embedding_dim = v;
        }
        if self.no_between_edges {
            cfg.use_between_edges = false;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.optimizer {
            cfg.optimizer = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.depth {
            cfg.encoder_depth = v;
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
    }
}

fn parse_extra<T: std::str::FromStr>(
    extras: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    extras
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
        })
        .transpose()
}

fn parse_extra_list<T: std::str::FromStr>(
    extras: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<Vec<T>>> {
    extras
        .get(key)
        .map(|v| {
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::config(key, format!("cannot parse `{x}`")))
                })
                .collect()
        })
        .transpose()
}

/// Resolved settings of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub config: TrainConfig,
    pub ratio: f64,
}

pub fn resolve_train(args: &TrainArgs) -> Result<TrainSettings> {
    let (mut config, extras) = read_config(args.train.config.as_deref(), &["ratio"])?;
    args.train.apply(&mut config);
    config.validate()?;
    let ratio = args
        .ratio
        .or(parse_extra(&extras, "ratio")?)
        .unwrap_or(DEFAULT_RATIO);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("ratio", format!("{ratio} is outside (0, 1)")));
    }
    Ok(TrainSettings { config, ratio })
}

pub struct TrainRun {
    pub settings: TrainSettings,
    pub outcome: TrainOutcome,
    /// `None` when no labeled node was held out.
    pub scores: Option<Scores>,
    pub manifest: RunManifest,
}

fn scores_to_tsv(scores: Option<&Scores>) -> String {
    let mut s = String::from("# mgcn scores v1\nscope\tmicro_f1\tmacro_f1\tn_test\n");
    match scores {
        Some(sc) => {
            let _ = writeln!(
                s,
                "all\t{:.4}\t{:.4}\t{}",
                sc.micro_f1, sc.macro_f1, sc.n_test
            );
            for l in &sc.per_layer {
                let _ = writeln!(
                    s,
                    "layer_{}\t{:.4}\t{:.4}\t{}",
                    l.layer, l.micro_f1, l.macro_f1, l.n_test
                );
            }
        }
        None => s.push_str("# no held-out labeled nodes\n"),
    }
    s
}

/// Trains once on `args.dataset`. The split and the initialization both use
/// the configured seed.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainRun> {
    let settings = resolve_train(args)?;
    let graph = load_graph(&args.dataset)?;
    let split = split_labels(&graph, settings.ratio, settings.config.seed)?;
    for &(k, c) in &split.missing_classes {
        eprintln!("warning: class {c} of layer {} has no training node", k + 1);
    }
    create_dir(&args.out_dir)?;

    let mut manifest = RunManifest::new("train");
    manifest.push("dataset", args.dataset.display());
    manifest.push("dataset_digest", graph_digest(&graph));
    manifest.push("ratio", settings.ratio);
    manifest.extend_text(&settings.config.to_text());
    let mut artifacts: Vec<String> = (0..graph.num_layers())
        .map(mgcn::model::embeddings_file)
        .collect();
    artifacts.extend([HISTORY_FILE.to_string(), SCORES_FILE.to_string()]);
    manifest.push("artifacts", artifacts.join(","));
    manifest.write(&args.out_dir)?;

    let outcome = train(&graph, &split, &settings.config)?;
    write_embeddings(&outcome.embeddings, &args.out_dir)?;
    outcome.history.write(args.out_dir.join(HISTORY_FILE))?;
    let scores = match evaluate(&graph, &outcome.params, &split) {
        Ok(s) => Some(s),
        Err(Error::EmptyTestSet) => None,
        Err(e) => return Err(e),
    };
    write_file(
        &args.out_dir.join(SCORES_FILE),
        &scores_to_tsv(scores.as_ref()),
    )?;
    Ok(TrainRun {
        settings,
        outcome,
        scores,
        manifest,
    })
}

/// Resolved settings of an evaluation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub config: TrainConfig,
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub plan: ExperimentPlan,
}

pub fn resolve_eval(args: &EvalArgs) -> Result<EvalSettings> {
    let (mut config, extras) = read_config(
        args.train.config.as_deref(),
        &["ratios", "runs", "methods", "dims", "jobs"],
    )?;
    args.train.apply(&mut config);
    config.validate()?;

    let methods: Vec<String> = match &args.methods {
        Some(m) => m.clone(),
        None => parse_extra_list(&extras, "methods")?
            .unwrap_or_else(|| vec![Method::Mgcn.tag().to_string()]),
    };
    let methods = methods
        .iter()
        .map(|m| m.trim().parse())
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(Error::config("methods", "at least one method is required"));
    }
    let dims = match &args.dims {
        Some(d) => d.clone(),
        None => parse_extra_list(&extras, "dims")?.unwrap_or_else(|| vec![config.embedding_dim]),
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::config("dims", "dimensions must be at least 1"));
    }
    let defaults = ExperimentPlan::default();
    let ratios = match &args.ratios {
        Some(r) => r.clone(),
        None => parse_extra_list(&extras, "ratios")?.unwrap_or(defaults.ratios),
    };
    if ratios.is_empty() {
        return Err(Error::config("ratios", "at least one ratio is required"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::config("ratios", format!("{r} is outside (0, 1)")));
    }
    let runs = match args.runs {
        Some(r) => r,
        None => parse_extra(&extras, "runs")?.unwrap_or(defaults.runs),
    };
    if runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let jobs = match args.jobs {
        Some(j) => j,
        None => parse_extra(&extras, "jobs")?.unwrap_or(defaults.jobs),
    };
    if jobs == 0 {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    let plan = ExperimentPlan {
        ratios,
        runs,
        base_seed: config.seed,
        jobs,
    };
    Ok(EvalSettings {
        config,
        methods,
        dims,
        plan,
    })
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// One report row per method, dimension and ratio, in that nesting order.
pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<ExperimentReport>> {
    let settings = resolve_eval(args)?;
    let graph = load_graph(&args.dataset)?;
    create_dir(&args.out_dir)?;

    let mut manifest = RunManifest::new("eval");
    manifest.push("dataset", args.dataset.display());
    manifest.push("dataset_digest", graph_digest(&graph));
    manifest.push("methods", join(&settings.methods));
    manifest.push("ratios", join(&settings.plan.ratios));
    manifest.push("dims", join(&settings.dims));
    manifest.push("runs", settings.plan.runs);
    manifest.push("jobs", settings.plan.jobs);
    manifest.extend_text(&settings.config.to_text());
    manifest.push("artifacts", REPORT_FILE);
    manifest.write(&args.out_dir)?;

    let mut reports = Vec::new();
    for &method in &settings.methods {
        reports.extend(dimension_sweep(
            &graph,
            method,
            &settings.dims,
            &settings.config,
            &settings.plan,
        )?);
    }
    write_file(&args.out_dir.join(REPORT_FILE), &reports_to_tsv(&reports))?;
    Ok(reports)
}
