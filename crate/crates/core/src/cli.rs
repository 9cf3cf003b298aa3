//! `subseg` command-line interface.
//!
//! Tunables come from flags, then from a flat `key=value` config file
//! (`--config` or `$SUBSEG_CONFIG`), then from built-in defaults. Config
//! keys are the long flag names without dashes, e.g. `max-iters=10`.
//!
//! Exit codes: 0 success, 1 usage, 2 data/validation, 3 I/O.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::classify::{self, ClassifierModel, ExternalScores, RegionScorer, TrainConfig};
use crate::eval::{self, DecisionRule};
use crate::isolate;
use crate::pipeline::{self, MaskSource, PipelineParams};
use crate::regions;
use crate::render::{self, OverlaySpec};
use crate::slic::{self, SlicParams};
use crate::synthgen::{self, DatasetManifest, Split, SynthConfig};
use crate::{color, io, Error, ErrorKind, Label, Level, Result};

pub const CONFIG_ENV: &str = "SUBSEG_CONFIG";
const DEFAULT_THRESHOLD: f64 = 30.0;

const CONFIG_KEYS: &[&str] = &[
    "k",
    "m",
    "max-iters",
    "lr",
    "momentum",
    "batch-size",
    "epochs",
    "seed",
    "train-fraction",
    "tau",
    "decision-rule",
    "threshold",
    "thickness",
    "n",
    "n-test",
    "width",
    "height",
    "anomaly-probability",
    "noise-sigma",
];

#[derive(Debug, Parser)]
#[command(
    name = "subseg",
    version,
    about = "Object vs sub-component anomaly detection"
)]
struct Cli {
    /// Flat key=value config file; overrides $SUBSEG_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic benchmark.
    Gen(GenArgs),
    /// Write an object mask or a superpixel label map for one image.
    Segment(SegmentArgs),
    /// Train a region classifier for one strategy.
    Train(TrainArgs),
    /// Evaluate a model or external scores on the test split.
    Eval(EvalArgs),
    /// Train and evaluate both strategies; print the comparison table.
    Compare(CompareArgs),
    /// Draw contour overlays for one image.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Train pool size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    anomaly_probability: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct SlicArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct FitArgs {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct RegionArgs {
    /// Minimum anomalous share of a superpixel for an anomaly label.
    #[arg(long)]
    tau: Option<f64>,
    /// Isolate objects by luminance threshold instead of the manifest masks.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    image: PathBuf,
    #[arg(long, default_value = "subcomponent")]
    level: Level,
    /// Output PNG (mask, or 16-bit label map with a `.hdr` sidecar).
    #[arg(long)]
    out: PathBuf,
    /// Object mask PNG; restricts sub-component segmentation to the object.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Luminance threshold for object isolation.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    slic: SlicArgs,
    /// Also write `<image_id>_overlay.png` next to the output.
    #[arg(long)]
    render: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    strategy: Level,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    slic: SlicArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    region: RegionArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    strategy: Level,
    #[arg(long, conflicts_with = "scores")]
    model: Option<PathBuf>,
    /// External scores, `crop_filename,anomaly_probability`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Write test crops and `request.csv` here for an external scorer, then exit.
    #[arg(long, conflicts_with_all = ["model", "scores"])]
    export_crops: Option<PathBuf>,
    #[arg(long)]
    decision_rule: Option<DecisionRule>,
    /// Write the metrics CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    slic: SlicArgs,
    #[command(flatten)]
    region: RegionArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for `comparison.csv` and `comparison.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    decision_rule: Option<DecisionRule>,
    #[command(flatten)]
    slic: SlicArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    region: RegionArgs,
}

#[derive(Debug, Args)]
struct RenderArgs {
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Existing label map; segmented from scratch when absent.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Colour contours by this model's verdicts.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    thickness: Option<usize>,
    #[command(flatten)]
    slic: SlicArgs,
}

/// Flat `key=value` settings below command-line flags.
#[derive(Debug, Default)]
struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => return Ok(Self::default()),
            },
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let values = io::parse_key_values(&text, "config")?;
        if let Some(k) = values.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidParams(format!("unknown config key `{k}`")));
        }
        Ok(Self { values })
    }

    fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::InvalidParams(format!("config `{key}`: cannot parse `{raw}`"))),
            None => Ok(default),
        }
    }

    fn pick_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|raw| {
                raw.parse().map_err(|_| {
                    Error::InvalidParams(format!("config `{key}`: cannot parse `{raw}`"))
                })
            })
            .transpose()
    }

    fn slic(&self, a: &SlicArgs) -> Result<SlicParams> {
        let d = SlicParams::default();
        let p = SlicParams {
            k: self.pick("k", a.k, d.k)?,
            m: self.pick("m", a.m, d.m)?,
            max_iters: self.pick("max-iters", a.max_iters, d.max_iters)?,
            ..d
        };
        p.validate(usize::MAX)?;
        Ok(p)
    }

    fn train(&self, a: &FitArgs) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let c = TrainConfig {
            learning_rate: self.pick("lr", a.lr, d.learning_rate)?,
            momentum: self.pick("momentum", a.momentum, d.momentum)?,
            batch_size: self.pick("batch-size", a.batch_size, d.batch_size)?,
            epochs: self.pick("epochs", a.epochs, d.epochs)?,
            rng_seed: self.pick("seed", a.seed, d.rng_seed)?,
            train_fraction: self.pick("train-fraction", a.train_fraction, d.train_fraction)?,
            ..d
        };
        c.validate()?;
        Ok(c)
    }

    fn pipeline(&self, slic: &SlicArgs, region: &RegionArgs) -> Result<PipelineParams> {
        let d = PipelineParams::default();
        let label_tau = self.pick("tau", region.tau, d.label_tau)?;
        if !(label_tau > 0.0 && label_tau <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "tau must be in (0, 1], got {label_tau}"
            )));
        }
        let mask_source = match self.pick_opt("threshold", region.threshold)? {
            Some(t) => MaskSource::Threshold(check_threshold(t)?),
            None => MaskSource::GroundTruth,
        };
        Ok(PipelineParams {
            slic: self.slic(slic)?,
            label_tau,
            mask_source,
        })
    }

    fn rule(&self, flag: Option<DecisionRule>) -> Result<DecisionRule> {
        self.pick("decision-rule", flag, DecisionRule::Any)
    }
}

fn check_threshold(t: f64) -> Result<f64> {
    if (0.0..=255.0).contains(&t) {
        Ok(t)
    } else {
        Err(Error::InvalidParams(format!(
            "threshold must be in [0, 255], got {t}"
        )))
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn overlay_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_overlay.png"))
}

fn parent_dir(path: &Path) -> &Path {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen(cfg: &Config, a: &GenArgs) -> Result<()> {
    let d = SynthConfig::default();
    let synth = SynthConfig {
        n_images: cfg.pick("n", a.n, d.n_images)?,
        n_test: cfg.pick("n-test", a.n_test, d.n_test)?,
        rng_seed: cfg.pick("seed", a.seed, d.rng_seed)?,
        image_w: cfg.pick("width", a.width, d.image_w)?,
        image_h: cfg.pick("height", a.height, d.image_h)?,
        anomaly_probability: cfg.pick(
            "anomaly-probability",
            a.anomaly_probability,
            d.anomaly_probability,
        )?,
        noise_sigma: cfg.pick("noise-sigma", a.noise_sigma, d.noise_sigma)?,
        ..d
    };
    let manifest = synthgen::generate_dataset(&synth, &a.out)?;
    println!(
        "{} ({} images)",
        a.out.join(synthgen::MANIFEST_NAME).display(),
        manifest.records.len()
    );
    Ok(())
}

fn cmd_segment(cfg: &Config, a: &SegmentArgs) -> Result<()> {
    let img = io::read_rgb(&a.image)?;
    let threshold = cfg
        .pick_opt("threshold", a.threshold)?
        .map(check_threshold)
        .transpose()?;
    let mask = match (&a.mask, threshold) {
        (Some(p), _) => Some(isolate::load_mask_for(p, img.width(), img.height())?),
        (None, Some(t)) => Some(isolate::threshold_segment(&img, t)?),
        (None, None) if a.level == Level::Object => {
            Some(isolate::threshold_segment(&img, DEFAULT_THRESHOLD)?)
        }
        (None, None) => None,
    };
    let id = image_id(&a.image);
    match a.level {
        Level::Object => {
            let mask = mask.expect("object level always has a mask");
            if mask.is_empty() {
                return Err(Error::NoForeground);
            }
            mask.save(&a.out)?;
            println!("{}: {} object pixels", a.out.display(), mask.count());
            if a.render {
                let map = slic::SuperpixelMap::new(
                    img.width(),
                    img.height(),
                    mask.bits()
                        .iter()
                        .map(|&b| if b { 0 } else { slic::BACKGROUND })
                        .collect(),
                )?;
                let overlay = render::draw_segment_contours(&img, &map, &OverlaySpec::default())?;
                io::write_rgb(overlay_path(parent_dir(&a.out), &id), &overlay)?;
            }
        }
        Level::Subcomponent => {
            let params = cfg.slic(&a.slic)?;
            let lab = color::srgb_to_lab(&img);
            let seg = slic::segment_masked(&lab, mask.as_ref().map(|m| m.bits()), &params)?;
            io::write_label_map(&a.out, &seg.map, Some(&params))?;
            println!("{}: {} segments", a.out.display(), seg.map.num_segments());
            if a.render {
                let overlay =
                    render::draw_segment_contours(&img, &seg.map, &OverlaySpec::default())?;
                io::write_rgb(overlay_path(parent_dir(&a.out), &id), &overlay)?;
            }
        }
    }
    Ok(())
}

fn cmd_train(cfg: &Config, a: &TrainArgs) -> Result<()> {
    let params = cfg.pipeline(&a.slic, &a.region)?;
    let config = cfg.train(&a.fit)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    let images = pipeline::prepare_split(&manifest, Split::Train, a.strategy, &params)?;
    let examples = pipeline::training_examples(&images);
    let trained = classify::train(&examples, &config)?;
    trained.model.save(&a.out)?;
    let first = trained.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = trained.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "{}: {} regions, loss {first:.4} -> {last:.4}",
        a.out.display(),
        examples.len()
    );
    if let Some(acc) = trained.validation_accuracy {
        println!("held-out accuracy {:.2}%", 100.0 * acc);
    }
    Ok(())
}

/// Scores from a file, looked up by crop name.
struct FileScorer(ExternalScores);

impl RegionScorer for FileScorer {
    fn score(&self, crop: &regions::RegionCrop) -> Result<classify::Prediction> {
        self.0.get(&crop.file_name())
    }

    fn score_features(
        &self,
        name: &str,
        _: &classify::FeatureVector,
    ) -> Option<Result<classify::Prediction>> {
        Some(self.0.get(name))
    }
}

fn cmd_eval(cfg: &Config, a: &EvalArgs) -> Result<()> {
    let params = cfg.pipeline(&a.slic, &a.region)?;
    let rule = cfg.rule(a.decision_rule)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    if let Some(dir) = &a.export_crops {
        let n = pipeline::export_crops(&manifest, Split::Test, a.strategy, &params, dir)?;
        println!("{}: {n} crops", dir.join(pipeline::REQUEST_NAME).display());
        return Ok(());
    }
    let scorer: Box<dyn RegionScorer> = match (&a.model, &a.scores) {
        (Some(p), None) => Box::new(ClassifierModel::load(p)?),
        (None, Some(p)) => Box::new(FileScorer(ExternalScores::load(p)?)),
        _ => {
            return Err(Error::InvalidParams(
                "eval needs exactly one of --model or --scores".into(),
            ))
        }
    };
    let images = pipeline::prepare_split(&manifest, Split::Test, a.strategy, &params)?;
    let ev = eval::evaluate(&images, scorer.as_ref(), a.strategy, rule)?;
    let reports = [ev.region, ev.image];
    print!("{}", eval::comparison_table(&reports));
    if let Some(out) = &a.out {
        write_text(out, &eval::comparison_csv(&reports))?;
    }
    Ok(())
}

fn cmd_compare(cfg: &Config, a: &CompareArgs) -> Result<()> {
    let params = cfg.pipeline(&a.slic, &a.region)?;
    let config = cfg.train(&a.fit)?;
    let rule = cfg.rule(a.decision_rule)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    let start = Instant::now();
    let cmp = eval::run_comparison(&manifest, &params, rule, &config)?;
    for run in &cmp.runs {
        for img in &run.evaluation.images {
            println!(
                "{:<12} {:<14} truth={:<7} pred={:<7} {:>8.1} ms",
                run.strategy,
                img.image_id,
                img.truth,
                img.predicted,
                img.elapsed.as_secs_f64() * 1e3
            );
        }
    }
    for run in &cmp.runs {
        let n = run.evaluation.images.len().max(1) as f64;
        let mean = run
            .evaluation
            .images
            .iter()
            .map(|i| i.elapsed.as_secs_f64())
            .sum::<f64>()
            / n;
        println!(
            "{}: {} train regions, mean {:.1} ms/image",
            run.strategy,
            run.train_regions,
            mean * 1e3
        );
    }
    let reports = cmp.reports();
    let table = eval::comparison_table(&reports);
    print!("{table}");
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if let Some(dir) = &a.out {
        write_text(&dir.join("comparison.csv"), &eval::comparison_csv(&reports))?;
        write_text(&dir.join("comparison.txt"), &table)?;
    }
    Ok(())
}

fn cmd_render(cfg: &Config, a: &RenderArgs) -> Result<()> {
    let img = io::read_rgb(&a.image)?;
    let spec = OverlaySpec {
        contour_thickness: cfg.pick(
            "thickness",
            a.thickness,
            OverlaySpec::default().contour_thickness,
        )?,
        ..OverlaySpec::default()
    };
    spec.validate()?;
    let id = image_id(&a.image);
    let map = match &a.map {
        Some(p) => io::read_label_map(p)?.0,
        None => {
            let t = check_threshold(cfg.pick("threshold", a.threshold, DEFAULT_THRESHOLD)?)?;
            let mask = isolate::threshold_segment(&img, t)?;
            pipeline::segment_object(&img, &mask, &cfg.slic(&a.slic)?)?
        }
    };
    let overlay = match &a.model {
        None => render::draw_segment_contours(&img, &map, &spec)?,
        Some(p) => {
            let model = ClassifierModel::load(p)?;
            let crops = regions::extract_subcomponent_regions(&img, &map, &id)?;
            let labels = crops
                .iter()
                .map(|c| model.score(c).map(|p| p.label))
                .collect::<Result<Vec<_>>>()?;
            let n_anomaly = labels.iter().filter(|&&l| l == Label::Anomaly).count();
            println!("{n_anomaly} of {} segments anomalous", labels.len());
            render::draw_labeled_contours(&img, &map, &labels, &spec)?
        }
    };
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let path = overlay_path(&a.out, &id);
    io::write_rgb(&path, &overlay)?;
    println!("{}", path.display());
    Ok(())
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Io => 3,
    }
}

/// Run with the given arguments (program name first); returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = Config::load(cli.config.as_deref()).and_then(|cfg| match &cli.command {
        Command::Gen(a) => cmd_gen(&cfg, a),
        Command::Segment(a) => cmd_segment(&cfg, a),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Compare(a) => cmd_compare(&cfg, a),
        Command::Render(a) => cmd_render(&cfg, a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
