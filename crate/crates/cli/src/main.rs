mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lbboost::boost::{self, TrainConfig, ValidationGrid};
use lbboost::eval::{self, EvalImage, DEFAULT_DELTA, DEFAULT_TRUNCATION};
use lbboost::extract::{ExtractionMethod, ExtractionParams};
use lbboost::io::dataset::{load_dataset, save_dataset, Dataset, Partition};
use lbboost::io::model::{load_model, save_model};
use lbboost::io::results::{read_detections, write_detections, write_roc, ImageDetections};
use lbboost::io::synth::{synth, SynthConfig};

use config::{pick, Config};

#[derive(Debug, Parser)]
#[command(name = "lbboost", version, about = "Location-based boosting of Hit-or-Shift object detectors")]
struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train an ensemble on the train partition and validate extraction.
    Train(TrainArgs),
    /// Write detections of a trained model.
    Detect(DetectArgs),
    /// Print AROC and average precision of a detection file.
    Eval(EvalArgs),
    /// Write the truncated ROC curve of a detection file.
    Roc(RocArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    validation: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    min_objects: Option<usize>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    min_radius: Option<f64>,
    #[arg(long)]
    max_radius: Option<f64>,
    #[arg(long)]
    background: Option<f64>,
    #[arg(long)]
    contrast: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    kernel_radius: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Also write the per-iteration log here.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Candidate features drawn per iteration.
    #[arg(long)]
    candidates: Option<usize>,
    /// `rich` or `haar`.
    #[arg(long)]
    grammar: Option<String>,
    /// Correlation kernel as `shape:radius`, shape one of flat, linear, quadratic.
    #[arg(long)]
    kernel: Option<String>,
    /// Evidence mode, `capped` or `unique`.
    #[arg(long)]
    mode: Option<String>,
    /// Don't-care radius.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Background discount; defaults to objects / background pixels.
    #[arg(long)]
    background_discount: Option<f64>,
    /// `hinge` or `smooth`.
    #[arg(long)]
    loss: Option<String>,
    /// Extraction methods searched on the validation partition: `llm`, `kde` or `both`.
    #[arg(long)]
    validate: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// `llm` or `kde`; defaults to the model's validated choice.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    smoothing_radius: Option<u32>,
    #[arg(long)]
    kde_radius: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output detection file.
    #[arg(long)]
    out: PathBuf,
    /// Partition to run on.
    #[arg(long)]
    partition: Option<String>,
    #[command(flatten)]
    extract: ExtractArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    truncation: Option<f64>,
}

#[derive(Debug, Args)]
struct RocArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Output curve file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let seed = pick(cli.seed, config.seed, 0);
    match cli.command {
        Command::Synth(a) => run_synth(a, &config, seed),
        Command::Train(a) => run_train(a, &config, seed),
        Command::Detect(a) => run_detect(a, &config),
        Command::Eval(a) => run_eval(a, &config).map(|_| ()),
        Command::Roc(a) => run_roc(a, &config),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(value: Option<String>, what: &str) -> Result<Option<T>> {
    value
        .map(|v| v.parse::<T>().map_err(|e| anyhow!("--{what}: {e}")))
        .transpose()
}

fn run_synth(a: SynthArgs, config: &Config, seed: u64) -> Result<()> {
    let c = &config.synth;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        train: pick(a.train, c.train, d.train),
        validation: pick(a.validation, c.validation, d.validation),
        test: pick(a.test, c.test, d.test),
        width: pick(a.width, c.width, d.width),
        height: pick(a.height, c.height, d.height),
        min_objects: pick(a.min_objects, c.min_objects, d.min_objects),
        max_objects: pick(a.max_objects, c.max_objects, d.max_objects),
        min_radius: pick(a.min_radius, c.min_radius, d.min_radius),
        max_radius: pick(a.max_radius, c.max_radius, d.max_radius),
        background: pick(a.background, c.background, d.background),
        contrast: pick(a.contrast, c.contrast, d.contrast),
        noise: pick(a.noise, c.noise, d.noise),
        kernel_radius: pick(a.kernel_radius, c.kernel_radius, d.kernel_radius),
        seed,
    };
    let dataset = synth(&cfg)?;
    let manifest = save_dataset(&dataset, &a.out)?;
    println!("wrote {} images to {}", dataset.entries.len(), manifest.display());
    Ok(())
}

fn run_train(a: TrainArgs, config: &Config, seed: u64) -> Result<()> {
    let c = config.train.clone();
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        iterations: pick(a.iterations, c.iterations, d.iterations),
        candidates_per_iteration: pick(a.candidates, c.candidates, d.candidates_per_iteration),
        grammar: parse(a.grammar.or(c.grammar), "grammar")?.unwrap_or(d.grammar),
        feature_space: d.feature_space,
        kernel: parse(a.kernel.or(c.kernel), "kernel")?.unwrap_or(d.kernel),
        mode: parse(a.mode.or(c.mode), "mode")?.unwrap_or(d.mode),
        dont_care_radius: pick(a.rho, c.rho, d.dont_care_radius),
        alpha_max: pick(a.alpha_max, c.alpha_max, d.alpha_max),
        background_discount: a.background_discount.or(c.background_discount),
        loss: parse(a.loss.or(c.loss), "loss")?.unwrap_or(d.loss),
        seed,
    };
    let grid = match a.validate.or(c.validate).as_deref().unwrap_or("both") {
        "both" => ValidationGrid::default(),
        "llm" => ValidationGrid::llm_only(),
        "kde" => ValidationGrid {
            llm_radii: Vec::new(),
            ..ValidationGrid::default()
        },
        other => bail!("--validate: expected llm, kde or both, got `{other}`"),
    };
    let delta = pick(a.delta, config.eval.delta, DEFAULT_DELTA);

    let dataset = load_dataset(&a.manifest)?;
    let train = dataset.samples(Partition::Train);
    let mut log = match &a.log {
        Some(p) => Some(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => None,
    };
    let mut log_err = None;
    let mut ensemble = boost::train_with_observer(&train, &cfg, |r| {
        let line = r.log_line();
        eprintln!("{line}");
        if let Some(f) = log.as_mut() {
            if let Err(e) = writeln!(f, "{line}") {
                log_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).context("writing the training log");
    }
    eprintln!("trained {} members", ensemble.members.len());

    let validation = dataset.samples(Partition::Validation);
    if validation.iter().any(|s| !s.objects.is_empty()) {
        let v = boost::validate(&ensemble, &validation, &grid, delta)?;
        eprintln!(
            "validation: method={} smoothing_radius={} kde_radius={} ap={}",
            v.best.method, v.best.smoothing_radius, v.best.kde_radius, v.best_ap
        );
        ensemble.extraction = v.best;
    } else {
        eprintln!("validation partition has no objects; keeping default extraction");
    }
    save_model(&ensemble, &a.model)?;
    println!("wrote {}", a.model.display());
    Ok(())
}

fn partition_of(flag: Option<String>, config: &Config) -> Result<Partition> {
    Ok(parse(flag.or(config.eval.partition.clone()), "partition")?.unwrap_or(Partition::Test))
}

fn run_detect(a: DetectArgs, config: &Config) -> Result<()> {
    let ensemble = load_model(&a.model)?;
    let c = &config.extract;
    let stored = ensemble.extraction;
    let params = ExtractionParams {
        method: parse::<ExtractionMethod>(a.extract.method.or(c.method.clone()), "method")?.unwrap_or(stored.method),
        smoothing_radius: pick(a.extract.smoothing_radius, c.smoothing_radius, stored.smoothing_radius),
        kde_radius: pick(a.extract.kde_radius, c.kde_radius, stored.kde_radius),
        threshold: pick(a.extract.threshold, c.threshold, stored.threshold),
    };
    let dataset = load_dataset(&a.manifest)?;
    let partition = partition_of(a.partition, config)?;
    let mut out = Vec::new();
    for e in dataset.partition(partition) {
        let field = ensemble.objectness(&e.image)?;
        out.push(ImageDetections {
            id: e.id.clone(),
            detections: lbboost::extract::detect(&field, &params),
        });
    }
    write_detections(&a.out, &out)?;
    println!(
        "wrote {} detections on {} images to {}",
        out.iter().map(|d| d.detections.len()).sum::<usize>(),
        out.len(),
        a.out.display()
    );
    Ok(())
}

/// Pairs each image of the partition with its detections by id.
fn eval_inputs(dataset: &Dataset, partition: Partition, detections: &Path) -> Result<Vec<(ImageDetections, Vec<lbboost::Location>)>> {
    let mut dets = read_detections(detections)?;
    let mut out = Vec::new();
    for e in dataset.partition(partition) {
        let found = dets.iter().position(|d| d.id == e.id).map(|i| dets.remove(i));
        out.push((
            found.unwrap_or(ImageDetections {
                id: e.id.clone(),
                detections: Vec::new(),
            }),
            e.objects.clone(),
        ));
    }
    if let Some(extra) = dets.first() {
        bail!("detections reference image `{}` outside the {partition} partition", extra.id);
    }
    Ok(out)
}

fn run_eval(a: EvalArgs, config: &Config) -> Result<(eval::RocCurve, f64)> {
    let delta = pick(a.delta, config.eval.delta, DEFAULT_DELTA);
    let truncation = pick(a.truncation, config.eval.truncation, DEFAULT_TRUNCATION);
    let dataset = load_dataset(&a.manifest)?;
    let partition = partition_of(a.partition, config)?;
    let inputs = eval_inputs(&dataset, partition, &a.detections)?;
    let images: Vec<EvalImage> = inputs
        .iter()
        .map(|(d, t)| EvalImage {
            detections: &d.detections,
            truth: t,
        })
        .collect();
    let curve = eval::roc(&images, delta, truncation)?;
    let ap = eval::average_precision(&images, delta)?;
    println!("aroc {}", curve.area);
    println!("ap {ap}");
    println!("detection_rate_at_fpr_1 {}", curve.detection_rate_at(1.0));
    Ok((curve, ap))
}

fn run_roc(a: RocArgs, config: &Config) -> Result<()> {
    let out = a.out;
    let (curve, ap) = run_eval(a.eval, config)?;
    write_roc(&out, &curve, ap)?;
    println!("wrote {}", out.display());
    Ok(())
}
