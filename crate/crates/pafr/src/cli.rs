//! The `pafr` command-line tool.
//!
//! Exit codes: 0 on success, 1 for runtime failures (unreadable or invalid
//! data, schema mismatches, training errors), 2 for usage and configuration
//! errors. Log verbosity is read from `PAFR_LOG` (`error`, `warn`, `info`,
//! `debug`, `trace`; default `warn`), and `--quiet` lowers it to `error` and
//! suppresses the tables printed on stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pafr_core::attributes::PartContext;
use pafr_core::graph::{binary_edge_labels, truth_instances};
use pafr_core::learner::TrainConfig;
use pafr_core::pipeline::{PipelineConfig, PipelineError, DEFAULT_THRESHOLD};
use pafr_core::synthgen::{GenConfig, GenError, Split};
use pafr_core::{PartGraph, PipelineModel};
use thiserror::Error;

use crate::dataset::{self, GenFile, ManifestFile};
use crate::format::{read_dataset, Dataset, FormatError, PartReader};
use crate::model_io::{self, ModelIoError};
use crate::run::{self, RunError};
use crate::sweep::{CsvSink, SweepError, SweepPlan};

/// Parts read and predicted per batch while streaming `infer`.
const INFER_BATCH: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "pafr", version, about = "Panoptic machining-feature recognition on face-adjacency graphs")]
pub struct Cli {
    /// Seed for generation, fold assignment and sweep subsets.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Only report errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    Gen(GenArgs),
    /// Train both pipeline stages.
    Train(TrainArgs),
    /// Predict instances for every part of a dataset.
    Infer(InferArgs),
    /// Score a model or a predictions file against ground truth.
    Eval(EvalArgs),
    /// Train on nested subsets and score each on the test split.
    Sweep(SweepArgs),
    /// Print a part summary and its validation report.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub parts: Option<usize>,
    /// Output directory for dataset.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub with_grids: bool,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub ambiguity: Option<f64>,
    #[arg(long)]
    pub features_min: Option<usize>,
    #[arg(long)]
    pub features_max: Option<usize>,
    /// Comma-separated class names; the first must be `stock`.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct Hyper {
    #[arg(long, default_value_t = 200)]
    pub trees_binary: usize,
    #[arg(long, default_value_t = 400)]
    pub trees_semantic: usize,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Keep threshold on the calibrated same-instance probability.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Train the semantic stage on predicted instead of true instances.
    #[arg(long)]
    pub train_on_predicted: bool,
}

impl Hyper {
    fn config(&self, seed: u64) -> Result<PipelineConfig, CliError> {
        check_threshold(self.threshold)?;
        let stage = |n_trees| TrainConfig {
            n_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            n_folds: self.folds,
            seed,
            ..TrainConfig::binary()
        };
        let cfg = PipelineConfig {
            boundary: stage(self.trees_binary),
            semantic: stage(self.trees_semantic),
            threshold: self.threshold,
            train_on_predicted: self.train_on_predicted,
        };
        cfg.boundary.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Split definitions; defaults to manifest.json next to the data.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report (JSON) to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions file (one JSON record per part).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the threshold stored in the model.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "predictions"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Predictions written by `infer`; edge metrics are then unavailable.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    /// Class names or indices dropped from instance-level metrics.
    #[arg(long, value_delimiter = ',')]
    pub exclude_classes: Vec<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report (JSON) to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub exclude_classes: Vec<String>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, conflicts_with = "index")]
    pub part: Option<String>,
    #[arg(long)]
    pub index: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: FormatError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: ModelIoError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Gen(_) => 2,
            CliError::Sweep(e) if e.is_config() => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_threshold(tau: f64) -> Result<(), CliError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("threshold {tau} is outside (0, 1)")))
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} does not exist or is not a file", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Config(format!(
            "directory {} does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    read_dataset(BufReader::new(f)).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn load_model(path: &Path) -> Result<PipelineModel, CliError> {
    model_io::load_model(path).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

fn load_manifest(path: &Path) -> Result<ManifestFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn manifest_path(data: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dataset::sibling_manifest(data))
}

/// Validates the manifest path up front when a split is requested.
fn check_split_source(data: &Path, manifest: &Option<PathBuf>, split: SplitArg) -> Result<(), CliError> {
    if split != SplitArg::All {
        require_file(&manifest_path(data, manifest))?;
    }
    Ok(())
}

fn parts_for_split(
    data: &Path,
    manifest: &Option<PathBuf>,
    split: SplitArg,
    parts: Vec<PartGraph>,
) -> Result<Vec<PartGraph>, CliError> {
    let Some(s) = split.split() else {
        return Ok(parts);
    };
    let m = load_manifest(&manifest_path(data, manifest))?;
    let (kept, missing) = dataset::select_split(parts, &m, s);
    if let Some(id) = missing.first() {
        return Err(CliError::Config(format!(
            "manifest lists {} {} parts absent from {} (first: {id})",
            missing.len(),
            s.name(),
            data.display()
        )));
    }
    Ok(kept)
}

fn resolve_classes(names: &[String], class_names: &[String]) -> Result<Vec<u32>, CliError> {
    let mut out = Vec::new();
    for n in names {
        let idx = match class_names.iter().position(|c| c == n) {
            Some(i) => i as u32,
            None => n
                .parse::<u32>()
                .ok()
                .filter(|&i| (i as usize) < class_names.len())
                .ok_or_else(|| CliError::Config(format!("unknown class `{n}`")))?,
        };
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports always serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

struct Ctx {
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn show(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }
}

fn cmd_gen(ctx: &Ctx, seed_flag: Option<u64>, a: &GenArgs) -> Result<(), CliError> {
    let mut cfg = GenConfig::default();
    if let Some(path) = &a.config {
        require_file(path)?;
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        GenFile::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            .apply(&mut cfg);
    }
    if let Some(s) = seed_flag {
        cfg.seed = s;
    }
    if let Some(n) = a.parts {
        cfg.n_parts = n;
    }
    if a.with_grids {
        cfg.with_grids = true;
    }
    if let Some(v) = a.noise {
        cfg.noise = v;
    }
    if let Some(v) = a.ambiguity {
        cfg.ambiguity = v;
    }
    if let Some(v) = a.features_min {
        cfg.features_per_part.0 = v;
    }
    if let Some(v) = a.features_max {
        cfg.features_per_part.1 = v;
    }
    if let Some(c) = &a.classes {
        cfg.classes = c.clone();
    }
    cfg.validate()?;
    if a.out.exists() && !a.out.is_dir() {
        return Err(CliError::Config(format!("{} exists and is not a directory", a.out.display())));
    }
    let parts = dataset::generate(&cfg)?;
    let m = dataset::write_generated(&a.out, &cfg, &parts).map_err(io_err(&a.out))?;
    log::info!("wrote {} parts to {}", m.n_parts, a.out.display());
    ctx.show(&format!(
        "{} parts, {} instances, {} edges ({:.1}% boundary), splits {}/{}/{}\n",
        m.n_parts,
        m.n_instances,
        m.n_edges,
        100.0 * m.boundary_fraction,
        m.splits.train.len(),
        m.splits.val.len(),
        m.splits.test.len()
    ));
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    require_file(&a.data)?;
    check_split_source(&a.data, &a.manifest, a.split)?;
    require_parent(&a.out)?;
    if let Some(r) = &a.report {
        require_parent(r)?;
    }
    let cfg = a.hyper.config(ctx.seed)?;
    let data = load_data(&a.data)?;
    let classes = data.class_names();
    let parts = parts_for_split(&a.data, &a.manifest, a.split, data.parts)?;
    if parts.is_empty() {
        return Err(CliError::Config(format!("{} holds no parts to train on", a.data.display())));
    }
    let trained = run::train(&parts, &classes, &cfg)?;
    model_io::save_model(&trained.model, &a.out).map_err(io_err(&a.out))?;
    if let Some(r) = &a.report {
        write_json(r, &trained.report)?;
    }
    ctx.show(&trained.report.table());
    Ok(())
}

fn cmd_infer(a: &InferArgs) -> Result<(), CliError> {
    require_file(&a.model)?;
    require_file(&a.data)?;
    require_parent(&a.out)?;
    if let Some(t) = a.threshold {
        check_threshold(t)?;
    }
    let mut model = load_model(&a.model)?;
    if let Some(t) = a.threshold {
        model = model.with_threshold(t)?;
    }
    let input = File::open(&a.data).map_err(io_err(&a.data))?;
    let input_err = |source| CliError::Input {
        path: a.data.clone(),
        source,
    };
    let mut reader = PartReader::new(BufReader::new(input)).map_err(input_err)?;
    let mut out = BufWriter::new(File::create(&a.out).map_err(io_err(&a.out))?);
    let mut batch = Vec::with_capacity(INFER_BATCH);
    let mut n = 0usize;
    loop {
        batch.clear();
        for item in reader.by_ref().take(INFER_BATCH) {
            batch.push(item.map_err(input_err)?);
        }
        if batch.is_empty() {
            break;
        }
        let preds = run::infer_parts(&model, &batch)?;
        run::write_predictions(&mut out, &preds, model.class_names()).map_err(io_err(&a.out))?;
        n += batch.len();
    }
    out.flush().map_err(io_err(&a.out))?;
    log::info!("predicted {n} parts");
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    require_file(&a.data)?;
    check_split_source(&a.data, &a.manifest, a.split)?;
    for p in [&a.model, &a.predictions].into_iter().flatten() {
        require_file(p)?;
    }
    if let Some(o) = &a.out {
        require_parent(o)?;
    }
    if let Some(t) = a.threshold {
        check_threshold(t)?;
    }
    let data = load_data(&a.data)?;
    let mut class_names = data.class_names();
    let parts = parts_for_split(&a.data, &a.manifest, a.split, data.parts)?;
    let preds = if let Some(path) = &a.model {
        let mut model = load_model(path)?;
        if let Some(t) = a.threshold {
            model = model.with_threshold(t)?;
        }
        if class_names.is_empty() {
            class_names = model.class_names().to_vec();
        }
        run::infer_parts(&model, &parts)?
    } else {
        let path = a.predictions.as_ref().expect("clap requires a source");
        let f = File::open(path).map_err(io_err(path))?;
        let preds = run::read_predictions(BufReader::new(f))?;
        let preds = if a.split == SplitArg::All {
            preds
        } else {
            let ids: std::collections::HashSet<&str> = parts.iter().map(|g| g.part_id()).collect();
            preds.into_iter().filter(|p| ids.contains(p.part_id.as_str())).collect()
        };
        run::align_predictions(&parts, preds)?
    };
    let exclude = resolve_classes(&a.exclude_classes, &class_names)?;
    let report = run::evaluate(&parts, &preds, &class_names, &exclude)?;
    if let Some(o) = &a.out {
        write_json(o, &report)?;
    }
    ctx.show(&report.table());
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<(), CliError> {
    require_file(&a.data)?;
    let manifest = manifest_path(&a.data, &a.manifest);
    require_file(&manifest)?;
    require_parent(&a.out)?;
    let cfg = a.hyper.config(0)?;
    let m = load_manifest(&manifest)?;
    let data = load_data(&a.data)?;
    let classes = data.class_names();
    let exclude = resolve_classes(&a.exclude_classes, &classes)?;
    let (train, missing_train) = dataset::select_split(data.parts.clone(), &m, Split::Train);
    let (test, missing_test) = dataset::select_split(data.parts, &m, Split::Test);
    if !missing_train.is_empty() || !missing_test.is_empty() {
        return Err(CliError::Config(format!(
            "manifest {} does not match {}",
            manifest.display(),
            a.data.display()
        )));
    }
    let plan = SweepPlan {
        train: &train,
        test: &test,
        class_names: &classes,
        sizes: &a.sizes,
        seeds: &a.seeds,
        subset_seed: ctx.seed,
        config: cfg,
        exclude: &exclude,
    };
    plan.validate()?;
    let file = File::create(&a.out).map_err(io_err(&a.out))?;
    let mut sink = CsvSink::new(BufWriter::new(file)).map_err(SweepError::from)?;
    let mut failed = None;
    plan.run(|row| {
        if let Err(e) = sink.push(row) {
            failed.get_or_insert(e);
        }
        if !ctx.quiet {
            println!(
                "size {:>6} seed {:>4}  pq {:.4}  pq_excl_stock {:.4}  rl_acc {:.4}",
                row.train_size, row.seed, row.pq, row.pq_excl_stock, row.rl_acc
            );
        }
    })?;
    if let Some(e) = failed {
        return Err(SweepError::from(e).into());
    }
    sink.into_inner()
        .map_err(SweepError::from)?
        .flush()
        .map_err(io_err(&a.out))?;
    Ok(())
}

fn inspect_text(header: Option<&crate::format::Header>, n_parts: usize, g: &PartGraph) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    if let Some(h) = header {
        let _ = writeln!(
            s,
            "dataset: {} parts, schema {}, d_F {}, d_E {}, K {} ({})",
            n_parts,
            h.schema,
            h.d_face,
            h.d_edge,
            h.n_classes,
            h.classes.join(", ")
        );
    }
    let _ = writeln!(s, "part {}: {} faces, {} edges", g.part_id(), g.n_faces(), g.n_edges());
    let mut surfaces: BTreeMap<&str, usize> = BTreeMap::new();
    for f in g.faces() {
        *surfaces.entry(f.surface_type.name()).or_default() += 1;
    }
    let mut curves: BTreeMap<&str, usize> = BTreeMap::new();
    for e in g.edges() {
        *curves.entry(e.edge_type.name()).or_default() += 1;
    }
    let fmt_hist = |h: &BTreeMap<&str, usize>| {
        h.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")
    };
    let _ = writeln!(s, "  surfaces: {}", fmt_hist(&surfaces));
    let _ = writeln!(s, "  curves:   {}", fmt_hist(&curves));
    let degrees: Vec<usize> = (0..g.n_faces()).map(|f| g.degree(f)).collect();
    if let (Some(lo), Some(hi)) = (degrees.iter().min(), degrees.iter().max()) {
        let _ = writeln!(s, "  degree:   min {lo}, max {hi}");
    }
    let all = vec![1u8; g.n_edges()];
    let n_components = pafr_core::pipeline::components(g, &all).len();
    let _ = writeln!(s, "  connected components: {n_components}");
    let _ = writeln!(s, "  grids: {}", g.faces().iter().filter(|f| f.grid.is_some()).count());
    let _ = writeln!(s, "validation:");
    let _ = writeln!(s, "  structure: ok");
    if g.has_truth() {
        match (truth_instances(g), binary_edge_labels(g)) {
            (Ok(report), Ok(y)) => {
                let boundary = y.iter().filter(|&&v| v == 0).count();
                let _ = writeln!(
                    s,
                    "  ground truth: {} instances, {} boundary edges of {}",
                    report.instances.len(),
                    boundary,
                    y.len()
                );
                if report.is_clean() {
                    let _ = writeln!(s, "  instance connectivity: ok");
                } else {
                    let _ = writeln!(
                        s,
                        "  warning: disconnected instances split per component: {:?}",
                        report.disconnected
                    );
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                let _ = writeln!(s, "  ground truth: {e}");
            }
        }
    } else {
        let _ = writeln!(s, "  ground truth: none");
    }
    let ctx = PartContext::new(g);
    if ctx.warnings().is_empty() {
        let _ = writeln!(s, "  attributes: ok");
    }
    for w in ctx.warnings() {
        let _ = writeln!(s, "  warning: {w:?}");
    }
    s
}

fn cmd_inspect(ctx: &Ctx, a: &InspectArgs) -> Result<(), CliError> {
    require_file(&a.data)?;
    let data = load_data(&a.data)?;
    let g = if let Some(id) = &a.part {
        data.parts
            .iter()
            .find(|g| g.part_id() == id)
            .ok_or_else(|| CliError::Config(format!("no part `{id}` in {}", a.data.display())))?
    } else {
        let i = a.index.unwrap_or(0);
        data.parts.get(i).ok_or_else(|| {
            CliError::Config(format!("part index {i} is out of range ({} parts)", data.parts.len()))
        })?
    };
    ctx.show(&inspect_text(data.header.as_ref(), data.parts.len(), g));
    Ok(())
}

fn init_logging(quiet: bool) {
    let default = if quiet { "error" } else { "warn" };
    let mut b = env_logger::Builder::new();
    b.parse_filters(default);
    if !quiet {
        if let Ok(filters) = std::env::var("PAFR_LOG") {
            b.parse_filters(&filters);
        }
    }
    let _ = b.try_init();
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        quiet: cli.quiet,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| match &cli.command {
        Command::Gen(a) => cmd_gen(&ctx, cli.seed, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Inspect(a) => cmd_inspect(&ctx, a),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.quiet);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "pafr", "--seed", "3", "sweep", "--data", "d.jsonl", "--sizes", "50,250", "--seeds", "0,1,2", "--out", "s.csv",
            "--trees-binary", "10",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(3));
        match cli.command {
            Command::Sweep(a) => {
                assert_eq!(a.sizes, vec![50, 250]);
                assert_eq!(a.seeds, vec![0, 1, 2]);
                assert_eq!(a.hyper.trees_binary, 10);
                assert_eq!(a.hyper.trees_semantic, 400);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eval_needs_a_source() {
        assert!(Cli::try_parse_from(["pafr", "eval", "--data", "d"]).is_err());
        assert!(Cli::try_parse_from(["pafr", "eval", "--data", "d", "--model", "m", "--predictions", "p"]).is_err());
    }

    #[test]
    fn class_names_resolve() {
        let names: Vec<String> = ["stock", "slot"].iter().map(|s| s.to_string()).collect();
        assert_eq!(resolve_classes(&["slot".into(), "0".into()], &names).unwrap(), vec![0, 1]);
        assert!(resolve_classes(&["boss".into()], &names).is_err());
        assert!(resolve_classes(&["7".into()], &names).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["pafr", "gen", "--parts", "3"]), 2);
        assert_eq!(run(["pafr", "frobnicate"]), 2);
        assert_eq!(run(["pafr", "--help"]), 0);
    }
}
