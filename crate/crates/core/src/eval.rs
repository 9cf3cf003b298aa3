//! Metric suite and the object-level vs sub-component comparison.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::classify::{self, Prediction, RegionScorer, TrainConfig};
use crate::pipeline::{self, ImageRegions, PipelineParams};
use crate::synthgen::{DatasetManifest, Split};
use crate::{Error, Label, Level, Result};

/// Confusion counts with anomaly as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Anomaly, Label::Anomaly) => self.tp += 1,
            (Label::Benign, Label::Anomaly) => self.fp += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
            (Label::Anomaly, Label::Benign) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(self, other: Self) -> Self {
        Self::new(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn_ + other.fn_,
        )
    }

    /// Counts with benign taken as the positive class.
    pub fn swap_polarity(self) -> Self {
        Self::new(self.tn, self.fn_, self.tp, self.fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
    /// Recall of the anomaly class.
    pub tp_rate: f64,
    /// False-alarm rate `fp / (fp + tn)`.
    pub fp_rate: f64,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, F1, TP rate and FP rate; zero denominators give 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::Empty("confusion counts"));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        f1,
        tp_rate: recall,
        fp_rate: ratio(c.fp, c.fp + c.tn),
        counts: *c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Region,
    Image,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Region => "region",
            Granularity::Image => "image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub strategy: Level,
    pub granularity: Granularity,
    pub metrics: Metrics,
}

/// Image-level aggregation of region predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// Anomaly iff any region is predicted anomalous.
    Any,
    /// Anomaly iff the anomalous share of regions is at least this value.
    Fraction(f64),
}

impl std::str::FromStr for DecisionRule {
    type Err = Error;

    /// `any` or `fraction:<tau>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "any" {
            return Ok(DecisionRule::Any);
        }
        s.strip_prefix("fraction:")
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| (0.0..=1.0).contains(t))
            .map(DecisionRule::Fraction)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "decision rule `{s}`; expected `any` or `fraction:<0..1>`"
                ))
            })
    }
}

impl std::fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecisionRule::Any => f.write_str("any"),
            DecisionRule::Fraction(t) => write!(f, "fraction:{t}"),
        }
    }
}

pub fn image_decision(preds: &[Prediction], rule: DecisionRule) -> Result<Label> {
    if preds.is_empty() {
        return Err(Error::Empty("region predictions"));
    }
    let anomalous = preds.iter().filter(|p| p.label == Label::Anomaly).count();
    let flagged = match rule {
        DecisionRule::Any => anomalous > 0,
        DecisionRule::Fraction(tau) => anomalous as f64 / preds.len() as f64 >= tau,
    };
    Ok(if flagged {
        Label::Anomaly
    } else {
        Label::Benign
    })
}

/// Per-image outcome of an evaluation.
#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub image_id: String,
    pub truth: Label,
    pub predicted: Label,
    /// Feature extraction plus scoring time.
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub region: MetricsReport,
    pub image: MetricsReport,
    pub images: Vec<ImageOutcome>,
}

/// Score prepared images and compute region- and image-level metrics.
pub fn evaluate(
    images: &[ImageRegions],
    scorer: &dyn RegionScorer,
    strategy: Level,
    rule: DecisionRule,
) -> Result<Evaluation> {
    let mut region = ConfusionCounts::default();
    let mut image = ConfusionCounts::default();
    let mut outcomes = Vec::with_capacity(images.len());
    for img in images {
        let start = Instant::now();
        let preds = img
            .regions
            .iter()
            .map(|r| {
                scorer
                    .score_features(&r.name, &r.features)
                    .unwrap_or_else(|| {
                        Err(Error::InvalidParams(
                            "scorer cannot use precomputed features".into(),
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, p) in img.regions.iter().zip(&preds) {
            region.record(r.truth, p.label);
        }
        let predicted = image_decision(&preds, rule)?;
        image.record(img.image_label, predicted);
        outcomes.push(ImageOutcome {
            image_id: img.image_id.clone(),
            truth: img.image_label,
            predicted,
            elapsed: img.elapsed + start.elapsed(),
        });
    }
    Ok(Evaluation {
        region: MetricsReport {
            strategy,
            granularity: Granularity::Region,
            metrics: compute_metrics(&region)?,
        },
        image: MetricsReport {
            strategy,
            granularity: Granularity::Image,
            metrics: compute_metrics(&image)?,
        },
        images: outcomes,
    })
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: Level,
    pub trained: classify::Trained,
    pub train_regions: usize,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<StrategyRun>,
}

impl Comparison {
    /// Rows in table order: object region/image, then sub-component.
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.runs
            .iter()
            .flat_map(|r| [r.evaluation.region, r.evaluation.image])
            .collect()
    }

    pub fn run(&self, strategy: Level) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }
}

/// Train one classifier per strategy on the train split and evaluate both on
/// the test split.
pub fn run_comparison(
    manifest: &DatasetManifest,
    params: &PipelineParams,
    rule: DecisionRule,
    train_config: &TrainConfig,
) -> Result<Comparison> {
    let mut runs = Vec::new();
    for strategy in [Level::Object, Level::Subcomponent] {
        runs.push(run_strategy(
            manifest,
            strategy,
            params,
            rule,
            train_config,
        )?);
    }
    Ok(Comparison { runs })
}

pub fn run_strategy(
    manifest: &DatasetManifest,
    strategy: Level,
    params: &PipelineParams,
    rule: DecisionRule,
    train_config: &TrainConfig,
) -> Result<StrategyRun> {
    let train_images = pipeline::prepare_split(manifest, Split::Train, strategy, params)?;
    let examples = pipeline::training_examples(&train_images);
    drop(train_images);
    let trained = classify::train(&examples, train_config)?;
    let test_images = pipeline::prepare_split(manifest, Split::Test, strategy, params)?;
    if test_images.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let evaluation = evaluate(&test_images, &trained.model, strategy, rule)?;
    Ok(StrategyRun {
        strategy,
        trained,
        train_regions: examples.len(),
        evaluation,
    })
}

pub const TABLE_COLUMNS: [&str; 11] = [
    "strategy",
    "granularity",
    "A",
    "P",
    "F1",
    "TP",
    "FP",
    "tp",
    "fp",
    "tn",
    "fn",
];

fn row(r: &MetricsReport) -> [String; 11] {
    let m = &r.metrics;
    let pct = |v: f64| format!("{:.2}", 100.0 * v);
    [
        r.strategy.to_string(),
        r.granularity.as_str().to_string(),
        pct(m.accuracy),
        pct(m.precision),
        pct(m.f1),
        pct(m.tp_rate),
        pct(m.fp_rate),
        m.counts.tp.to_string(),
        m.counts.fp.to_string(),
        m.counts.tn.to_string(),
        m.counts.fn_.to_string(),
    ]
}

/// CSV with header `strategy,granularity,A,P,F1,TP,FP,tp,fp,tn,fn`; rates
/// are percentages with two decimals.
pub fn comparison_csv(reports: &[MetricsReport]) -> String {
    let mut out = TABLE_COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        out.push_str(&row(r).join(","));
        out.push('\n');
    }
    out
}

/// The same table, space aligned.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let rows: Vec<[String; 11]> = reports.iter().map(row).collect();
    let mut widths: Vec<usize> = TABLE_COLUMNS.iter().map(|c| c.len()).collect();
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(TABLE_COLUMNS.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}
