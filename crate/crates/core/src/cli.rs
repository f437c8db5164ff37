//! The `uegd` command line: synth, train, eval, sweep, analyze.
//!
//! Every command accepts `--config <file>` holding flat `key = value` lines
//! whose keys are long flag names; flags given on the command line win.

use std::ffi::OsString;
use std::fs::File;
use std::io::{LineWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{FeatureArchive, LoadPlan, MaskSpec, Split, SynthSpec};
use crate::eval::{
    evaluate, layer_sweep, variance_report, write_gate_records, write_variance_csv, MetricsReport,
};
use crate::model::{read_checkpoint, write_checkpoint, Aggregation, ModalitySet, ModelConfig, Uegd};
use crate::train::{run_trials, EpochLog, SplitData, TrainConfig};
use crate::{parallel, Error, Modality, Result};

#[derive(Debug, Parser)]
#[command(name = "uegd", version, about = "Late-fusion multimodal sentiment regression")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic archive with a planted signal.
    Synth(SynthArgs),
    /// Train one model per seed and report averaged test metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split and export gate weights.
    Eval(EvalArgs),
    /// Train a unimodal model per stored layer and pick the best one.
    Sweep(SweepArgs),
    /// Total and intra-video variance of checkpoint predictions.
    Analyze(AnalyzeArgs),
}

const COMMANDS: [&str; 5] = ["synth", "train", "eval", "sweep", "analyze"];

fn parse_modalities(s: &str) -> std::result::Result<ModalitySet, String> {
    ModalitySet::parse(s).map_err(|e| e.to_string())
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    Modality::parse(s).map_err(|e| e.to_string())
}

fn parse_aggregation(s: &str) -> std::result::Result<Aggregation, String> {
    Aggregation::parse(s).map_err(|e| e.to_string())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("invalid list element `{}`", p.trim())))
        .collect()
}

fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let seeds = parse_list::<u64>(s)?;
    if seeds.is_empty() {
        return Err("at least one seed is required".into());
    }
    Ok(seeds)
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let v = parse_list::<usize>(s)?;
    match v.as_slice() {
        [x] => Ok([*x; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(format!("expected one or three comma-separated values, got `{s}`")),
    }
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let v = parse_list::<usize>(s)?;
    match v.as_slice() {
        [x] => Ok((*x, *x)),
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected `min,max`, got `{s}`")),
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Archive root to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Clip counts for train,valid,test.
    #[arg(long, default_value = "64,16,16", value_parser = parse_triple)]
    pub clips: [usize; 3],
    /// Frame-count range `min,max` per clip.
    #[arg(long, default_value = "4,8", value_parser = parse_range)]
    pub frames: (usize, usize),
    /// Feature widths for visual,acoustic,linguistic.
    #[arg(long, default_value = "8,8,8", value_parser = parse_triple)]
    pub dims: [usize; 3],
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    /// Modalities to write.
    #[arg(long, default_value = "v,a,l", value_parser = parse_modalities)]
    pub modalities: ModalitySet,
    /// Modalities carrying the label signal.
    #[arg(long, default_value = "a", value_parser = parse_modalities)]
    pub informative: ModalitySet,
    #[arg(long, default_value_t = 0.5)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// key=value file with defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// 128-unit encoder FC, 64-d embedding, 64-unit decoder FC.
    Small,
    /// 256-unit encoder FC, 128-d embedding, 128-unit decoder FC.
    Large,
}

#[derive(Debug, Args)]
pub struct ModelDims {
    #[arg(long, value_enum, default_value = "small")]
    pub preset: Preset,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub enc_hidden: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dec_hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

impl ModelDims {
    fn config(&self, input_dims: [usize; 3], num_layers: [usize; 3]) -> ModelConfig {
        let mut cfg = match self.preset {
            Preset::Small => ModelConfig::small(input_dims, num_layers),
            Preset::Large => ModelConfig::large(input_dims, num_layers),
        };
        cfg.embed_dim = self.embed_dim.unwrap_or(cfg.embed_dim);
        cfg.enc_hidden = self.enc_hidden.unwrap_or(cfg.enc_hidden);
        cfg.heads = self.heads.unwrap_or(cfg.heads);
        cfg.dec_hidden = self.dec_hidden.unwrap_or(cfg.dec_hidden);
        cfg.dropout = self.dropout.unwrap_or(cfg.dropout);
        cfg
    }
}

#[derive(Debug, Args)]
pub struct TrainOpts {
    /// Comma-separated trial seeds.
    #[arg(long, default_value = "1,2,3,4,5", value_parser = parse_seeds)]
    pub seeds: ::std::vec::Vec<u64>,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub warmup_frac: f64,
    /// Largest masked fraction of frames and of feature dims; 0 disables masking.
    #[arg(long, default_value_t = 0.2)]
    pub mask_ratio: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

impl TrainOpts {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            base_lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            warmup_frac: self.warmup_frac,
            patience: self.patience,
            seeds: self.seeds.clone(),
            mask: MaskSpec::with_ratio(self.mask_ratio),
            workers: self.workers,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Parent directory for the run directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "v,a,l", value_parser = parse_modalities)]
    pub modalities: ModalitySet,
    /// final | weighted | single:<k> | single:<kv,ka,kl>
    #[arg(long, default_value = "final", value_parser = parse_aggregation)]
    pub aggregation: Aggregation,
    #[command(flatten)]
    pub model: ModelDims,
    #[command(flatten)]
    pub train: TrainOpts,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory for metrics and gate CSVs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test", value_parser = Split::parse)]
    pub split: Split,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Modality whose layers are swept.
    #[arg(long, value_parser = parse_modality)]
    pub modality: Modality,
    #[command(flatten)]
    pub model: ModelDims,
    #[command(flatten)]
    pub train: TrainOpts,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// One or more checkpoints; each becomes a row tagged by its file stem.
    #[arg(long, required = true, num_args = 1..)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test", value_parser = Split::parse)]
    pub split: Split,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Reads `key = value` lines into `--key=value` arguments.
pub fn config_file_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Config(format!("{}:{}: invalid key `{key}`", path.display(), i + 1)));
        }
        args.push(OsString::from(format!("--{key}={}", value.trim())));
    }
    Ok(args)
}

/// Splices config-file arguments in right after the subcommand name so
/// that later command-line flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config: Option<PathBuf> = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if s == "--config" {
            let p = args
                .get(i + 1)
                .ok_or_else(|| Error::Usage("--config needs a file path".into()))?;
            config = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let Some(pos) = args.iter().position(|a| COMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    let extra = config_file_args(&path)?;
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses, runs and returns the process exit code: 0 success, 1 runtime
/// failure, 2 usage or configuration error.
pub fn run_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a).map(|dir| println!("{}", dir.display())),
        Command::Eval(a) => cmd_eval(&a).map(|r| println!("mae={} corr={}", r.mae, r.corr)),
        Command::Sweep(a) => cmd_sweep(&a).map(|(dir, best)| println!("{}\nbest_layer={best}", dir.display())),
        Command::Analyze(a) => cmd_analyze(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let informative = Modality::ALL.map(|m| a.informative.contains(m));
    let spec = SynthSpec {
        clips: a.clips,
        frames: a.frames,
        dims: a.dims,
        layers: a.layers,
        modalities: a.modalities,
        informative,
        noise_std: a.noise_std,
        seed: a.seed,
    };
    spec.validate()?;
    let archive = crate::data::synth_generate(&spec, &a.out)?;
    log::info!(
        "wrote {} clips to {}",
        archive.manifest().records.len(),
        archive.root().display()
    );
    Ok(())
}

fn open_archive(path: &Path) -> Result<FeatureArchive> {
    if !path.is_dir() {
        return Err(Error::Config(format!("archive {} does not exist", path.display())));
    }
    FeatureArchive::open(path)
}

/// Checks that the archive holds every modality `cfg` reads, with the
/// feature width and layer count the model was built for.
pub fn check_compatible(cfg: &ModelConfig, archive: &FeatureArchive) -> Result<()> {
    for m in cfg.modalities.iter() {
        let i = m.index();
        match archive.shape(m) {
            None => return Err(Error::Config(format!("model uses {m} but the archive has no {m} features"))),
            Some(s) if s.dim != cfg.input_dims[i] || s.layers != cfg.num_layers[i] => {
                return Err(Error::Config(format!(
                    "model expects {m} features of width {} with {} layers, archive has width {} with {} layers",
                    cfg.input_dims[i], cfg.num_layers[i], s.dim, s.layers
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn require_splits(archive: &FeatureArchive, splits: &[Split]) -> Result<()> {
    let counts = archive.manifest().counts();
    for &s in splits {
        if counts[s as usize] == 0 {
            return Err(Error::Data(format!("split `{s}` is empty")));
        }
    }
    Ok(())
}

/// Creates `<out>/<timestamp>-seed<seed>`, adding a suffix on collision.
pub fn create_run_dir(out: &Path, seed: u64) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let base = format!("{stamp}-seed{seed}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!("run directory names are unbounded")
}

fn create_file(path: &Path) -> Result<LineWriter<File>> {
    Ok(LineWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The resolved settings of a run, in `--config` file syntax.
fn describe(model: &ModelConfig, train: &TrainConfig) -> String {
    let seeds: Vec<String> = train.seeds.iter().map(u64::to_string).collect();
    [
        format!("modalities = {}", model.modalities),
        format!("aggregation = {}", model.aggregation),
        format!("embed-dim = {}", model.embed_dim),
        format!("enc-hidden = {}", model.enc_hidden),
        format!("heads = {}", model.heads),
        format!("dec-hidden = {}", model.dec_hidden),
        format!("dropout = {}", model.dropout),
        format!("seeds = {}", seeds.join(",")),
        format!("batch-size = {}", train.batch_size),
        format!("lr = {}", train.base_lr),
        format!("max-epochs = {}", train.max_epochs),
        format!("patience = {}", train.patience),
        format!("warmup-frac = {}", train.warmup_frac),
        format!(
            "mask-ratio = {}",
            if train.mask.enabled { train.mask.max_time_ratio } else { 0.0 }
        ),
        format!("workers = {}", train.workers),
    ]
    .join("\n")
        + "\n"
}

fn write_results(path: &Path, seeds: &[u64], reports: &[MetricsReport], avg: &MetricsReport) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["trial", "seed", "mae", "corr", "acc2_nonneg", "acc2_pos", "f1_nonneg", "f1_pos"])?;
    let row = |r: &MetricsReport| {
        [r.mae, r.corr, r.acc2_nonneg, r.acc2_pos, r.f1_nonneg, r.f1_pos].map(|v| v.to_string())
    };
    for (i, (seed, r)) in seeds.iter().zip(reports).enumerate() {
        let mut rec = vec![(i + 1).to_string(), seed.to_string()];
        rec.extend(row(r));
        w.write_record(&rec)?;
    }
    let mut rec = vec!["avg".to_string(), String::new()];
    rec.extend(row(avg));
    w.write_record(&rec)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every trial and returns the run directory.
pub fn cmd_train(a: &TrainArgs) -> Result<PathBuf> {
    let train_cfg = a.train.config();
    train_cfg.validate()?;
    let archive = open_archive(&a.archive)?;
    let (dims, layers) = archive.dims();
    let mut cfg = a.model.config(dims, layers);
    cfg.modalities = a.modalities;
    cfg.aggregation = a.aggregation;
    cfg.validate()?;
    check_compatible(&cfg, &archive)?;
    require_splits(&archive, &Split::ALL)?;
    let model = Uegd::new(cfg.clone())?;

    let dir = create_run_dir(&a.out, train_cfg.seeds[0])?;
    write_text(&dir.join("config.txt"), &describe(&cfg, &train_cfg))?;
    let data = SplitData::load(&archive, &LoadPlan::for_model(&cfg))?;

    let names: Vec<String> = train_cfg
        .seeds
        .iter()
        .enumerate()
        .map(|(i, s)| format!("trial{}-seed{s}", i + 1))
        .collect();
    let mut logs = Vec::with_capacity(names.len());
    for n in &names {
        let mut w = create_file(&dir.join(format!("{n}.log")))?;
        writeln!(w, "{}", EpochLog::HEADER).map_err(|e| Error::io(&dir, e))?;
        logs.push(Mutex::new(w));
    }
    let sink = |trial: usize, log: &EpochLog| {
        log::info!("trial {} {log}", trial + 1);
        if let Ok(mut w) = logs[trial].lock() {
            let _ = writeln!(w, "{log}");
        }
    };
    let outcome = run_trials(&model, &data, &train_cfg, Some(&sink))?;
    for (n, t) in names.iter().zip(&outcome.trials) {
        write_checkpoint(dir.join(format!("{n}.ckpt")), &cfg, &t.params)?;
    }
    write_results(&dir.join("results.csv"), &train_cfg.seeds, &outcome.test, &outcome.average)?;
    Ok(dir)
}

fn load_checkpoint_for(path: &Path, archive: &FeatureArchive) -> Result<(Uegd, crate::model::ParamStore<f32>)> {
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    let (cfg, params) = read_checkpoint(path)?;
    check_compatible(&cfg, archive)
        .map_err(|e| Error::Config(format!("checkpoint {} does not match the archive: {e}", path.display())))?;
    Ok((Uegd::new(cfg)?, params))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `metrics.csv`, `predictions.csv`, `gates.csv` and
/// `gate_histogram.csv` under `--out`.
pub fn cmd_eval(a: &EvalArgs) -> Result<MetricsReport> {
    let archive = open_archive(&a.archive)?;
    let (model, params) = load_checkpoint_for(&a.checkpoint, &archive)?;
    require_splits(&archive, &[a.split])?;
    ensure_dir(&a.out)?;
    let data = archive.load_split(a.split, &LoadPlan::for_model(model.config()))?;
    let eval = parallel::with_workers(a.workers, || evaluate(&model, &params, &data))?;

    eval.report.write_csv(a.out.join("metrics.csv"))?;
    write_gate_records(a.out.join("gates.csv"), &eval.gates)?;
    eval.histogram().write_csv(a.out.join("gate_histogram.csv"))?;
    let path = a.out.join("predictions.csv");
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(|e| Error::io(&path, e))?);
    w.write_record(["clip_id", "video_id", "label", "prediction"])?;
    for (r, p) in data.records.iter().zip(&eval.predictions) {
        w.write_record([r.clip_id.as_str(), r.video_id.as_str(), &r.label.to_string(), &p.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(eval.report)
}

/// Returns the run directory and the selected layer.
pub fn cmd_sweep(a: &SweepArgs) -> Result<(PathBuf, usize)> {
    let train_cfg = a.train.config();
    train_cfg.validate()?;
    let archive = open_archive(&a.archive)?;
    let (dims, layers) = archive.dims();
    let mut base = a.model.config(dims, layers);
    base.modalities = ModalitySet::only(a.modality);
    base.validate()?;
    if archive.shape(a.modality).is_none() {
        return Err(Error::Config(format!("archive has no {} features", a.modality)));
    }
    require_splits(&archive, &Split::ALL)?;

    let dir = create_run_dir(&a.out, train_cfg.seeds[0])?;
    write_text(&dir.join("config.txt"), &describe(&base, &train_cfg))?;
    let log = Mutex::new(create_file(&dir.join("sweep.log"))?);
    if let Ok(mut w) = log.lock() {
        writeln!(w, "layer,seed,{}", EpochLog::HEADER).map_err(|e| Error::io(&dir, e))?;
    }
    let sink = |layer: usize, seed: u64, l: &EpochLog| {
        log::info!("layer {layer} seed {seed} {l}");
        if let Ok(mut w) = log.lock() {
            let _ = writeln!(w, "{layer},{seed},{l}");
        }
    };
    let result = layer_sweep(&archive, a.modality, &base, &train_cfg, Some(&sink))?;
    result.write_csv(dir.join("layer_sweep.csv"))?;
    Ok((dir, result.best_layer))
}

/// Writes `variance.csv` with a `labels` row followed by one row per checkpoint.
pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let archive = open_archive(&a.archive)?;
    require_splits(&archive, &[a.split])?;
    let mut models = Vec::with_capacity(a.checkpoint.len());
    for path in &a.checkpoint {
        models.push(load_checkpoint_for(path, &archive)?);
    }
    ensure_dir(&a.out)?;
    let records: Vec<_> = archive.manifest().split(a.split).cloned().collect();
    let videos: Vec<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
    let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
    let mut reports = vec![variance_report("labels", &labels, &videos)?];
    for (path, (model, params)) in a.checkpoint.iter().zip(&models) {
        let data = archive.load_split(a.split, &LoadPlan::for_model(model.config()))?;
        let eval = parallel::with_workers(a.workers, || evaluate(model, params, &data))?;
        let tag = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        reports.push(variance_report(&tag, &eval.predictions, &videos)?);
    }
    write_variance_csv(a.out.join("variance.csv"), &reports)
}
