//! Per-region binary classification.
//!
//! The reference classifier is a one-hidden-layer tanh network over a
//! hand-built 280-value descriptor of each crop, trained with mini-batch SGD
//! with momentum on softmax cross-entropy. Anything implementing
//! [`RegionScorer`] can take its place; [`ExternalScores`] reads
//! probabilities produced by an out-of-process model.
//!
//! # Model file layout
//!
//! All integers and reals are little-endian.
//!
//! | field | type |
//! |---|---|
//! | magic `SUBSEGM\0` | 8 bytes |
//! | format version (= 1) | u32 |
//! | architecture descriptor length, bytes | u32, UTF-8 |
//! | input dim, hidden dim, class count | 3 × u32 |
//! | feature mean, feature std | 2 × input × f64 |
//! | hidden weights (row-major `[hidden][input]`), hidden bias | f64 |
//! | output weights (row-major `[class][hidden]`), output bias | f64 |
//! | learning rate, momentum | 2 × f64 |
//! | batch size, epochs, rng seed | 3 × u64 |
//! | upsample minority | u8 (0/1) |
//! | train fraction | f64 |

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{LabCache, RgbImage};
use crate::regions::RegionCrop;
use crate::{Error, Label, Result};

const GRID: usize = 8;
const COLOR_BINS: usize = 24;
const GRAD_BINS: usize = 16;
/// Length of the default feature layout.
pub const FEATURE_LEN: usize = GRID * GRID * 3 + COLOR_BINS * 3 + GRAD_BINS;
pub const HIDDEN: usize = 32;
const CLASSES: usize = 2;

const CHANNEL_RANGE: [(f64, f64); 3] = [(0.0, 100.0), (-128.0, 128.0), (-128.0, 128.0)];
// Central differences of L are at most 50 per pixel.
const GRAD_MAX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn featurize(crop: &RegionCrop) -> FeatureVector {
    featurize_image(&crop.pixels)
}

/// Descriptor layout: 8×8 grid of mean (L, a, b) (cell-major, then channel),
/// 24-bin histograms of L, a and b, 16-bin histogram of L gradient magnitude.
/// Histograms are normalised to sum to one.
pub fn featurize_image(img: &RgbImage) -> FeatureVector {
    let (w, h) = img.dims();
    thread_local! {
        static CACHE: std::cell::RefCell<LabCache> = std::cell::RefCell::new(LabCache::with_bits(16));
    }
    let lab: Vec<[f64; 3]> =
        CACHE.with_borrow_mut(|cache| img.pixels().map(|p| cache.convert(p)).collect());
    let n = (w * h) as f64;
    let mut out = vec![0.0; FEATURE_LEN];

    let (grid, rest) = out.split_at_mut(GRID * GRID * 3);
    let (hist, grad) = rest.split_at_mut(COLOR_BINS * 3);

    for gy in 0..GRID {
        let (y0, y1) = (
            gy * h / GRID,
            ((gy + 1) * h / GRID).max(gy * h / GRID + 1).min(h),
        );
        for gx in 0..GRID {
            let (x0, x1) = (
                gx * w / GRID,
                ((gx + 1) * w / GRID).max(gx * w / GRID + 1).min(w),
            );
            let mut sum = [0.0; 3];
            for y in y0.min(h - 1)..y1 {
                for p in &lab[y * w + x0.min(w - 1)..y * w + x1] {
                    sum[0] += p[0];
                    sum[1] += p[1];
                    sum[2] += p[2];
                }
            }
            let count = ((y1 - y0.min(h - 1)) * (x1 - x0.min(w - 1))) as f64;
            let cell = &mut grid[(gy * GRID + gx) * 3..][..3];
            for c in 0..3 {
                cell[c] = sum[c] / count;
            }
        }
    }

    #[inline]
    fn bin(v: f64, lo: f64, scale: f64, bins: usize) -> usize {
        (((v - lo) * scale).max(0.0) as usize).min(bins - 1)
    }
    let scales = CHANNEL_RANGE.map(|(lo, hi)| COLOR_BINS as f64 / (hi - lo));
    let mut counts = [[0u32; COLOR_BINS]; 3];
    for p in &lab {
        for c in 0..3 {
            counts[c][bin(p[c], CHANNEL_RANGE[c].0, scales[c], COLOR_BINS)] += 1;
        }
    }
    for (dst, &k) in hist.iter_mut().zip(counts.iter().flatten()) {
        *dst = k as f64 / n;
    }

    let l: Vec<f64> = lab.iter().map(|p| p[0]).collect();
    let grad_scale = GRAD_BINS as f64 / GRAD_MAX;
    let mut gcounts = [0u32; GRAD_BINS];
    for y in 0..h {
        let (above, row, below) = (
            &l[y.saturating_sub(1) * w..][..w],
            &l[y * w..][..w],
            &l[(y + 1).min(h - 1) * w..][..w],
        );
        for x in 0..w {
            let gx = (row[(x + 1).min(w - 1)] - row[x.saturating_sub(1)]) / 2.0;
            let gy = (below[x] - above[x]) / 2.0;
            gcounts[bin((gx * gx + gy * gy).sqrt(), 0.0, grad_scale, GRAD_BINS)] += 1;
        }
    }
    for (dst, &k) in grad.iter_mut().zip(&gcounts) {
        *dst = k as f64 / n;
    }
    FeatureVector(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    pub upsample_minority: bool,
    /// Share of each class used for fitting; the rest is held out.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            rng_seed: 0,
            upsample_minority: true,
            train_fraction: 0.7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParams(
                "learning rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParams("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParams(
                "batch size and epochs must be positive".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParams(
                "train fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Two-layer tanh network with a flat parameter vector:
/// `[w1 (hidden×input), b1, w2 (classes×hidden), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        hidden * input + hidden + CLASSES * hidden + CLASSES
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            params: vec![0.0; Self::param_count(input, hidden)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(input, hidden);
        let (w1, rest) = net.params.split_at_mut(hidden * input);
        let lim1 = (6.0 / (input + hidden) as f64).sqrt();
        w1.iter_mut()
            .for_each(|v| *v = rng.random_range(-lim1..lim1));
        let w2 = &mut rest[hidden..hidden + CLASSES * hidden];
        let lim2 = (6.0 / (hidden + CLASSES) as f64).sqrt();
        w2.iter_mut()
            .for_each(|v| *v = rng.random_range(-lim2..lim2));
        net
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(CLASSES * self.hidden);
        (w1, b1, w2, b2)
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> [f64; CLASSES] {
        let (w1, b1, w2, b2) = self.split();
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[j];
            *h = z.tanh();
        }
        let mut logits = [0.0; CLASSES];
        for (c, out) in logits.iter_mut().enumerate() {
            let row = &w2[c * self.hidden..(c + 1) * self.hidden];
            *out = row
                .iter()
                .zip(hidden.iter())
                .map(|(w, h)| w * h)
                .sum::<f64>()
                + b2[c];
        }
        logits
    }

    pub fn logits(&self, x: &[f64]) -> [f64; CLASSES] {
        let mut hidden = vec![0.0; self.hidden];
        self.forward(x, &mut hidden)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, xs: &[&[f64]], ys: &[usize]) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let logits = self.forward(x, &mut hidden);
                -log_softmax(logits)[y]
            })
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Mean cross-entropy and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(xs, ys, &mut grad);
        (loss, grad)
    }

    fn accumulate(&self, xs: &[&[f64]], ys: &[usize], grad: &mut [f64]) -> f64 {
        let (input, hidden_n) = (self.input, self.hidden);
        let (_, _, w2, _) = self.split();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gw1, rest) = grad.split_at_mut(hidden_n * input);
        let (gb1, rest) = rest.split_at_mut(hidden_n);
        let (gw2, gb2) = rest.split_at_mut(CLASSES * hidden_n);
        let mut hidden = vec![0.0; hidden_n];
        let mut dh = vec![0.0; hidden_n];
        let scale = 1.0 / xs.len() as f64;
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let logits = self.forward(x, &mut hidden);
            let logp = log_softmax(logits);
            total -= logp[y];
            let mut dlogit = [0.0; CLASSES];
            for c in 0..CLASSES {
                dlogit[c] = (logp[c].exp() - (c == y) as u8 as f64) * scale;
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..CLASSES {
                gb2[c] += dlogit[c];
                let row = &w2[c * hidden_n..(c + 1) * hidden_n];
                let grow = &mut gw2[c * hidden_n..(c + 1) * hidden_n];
                for j in 0..hidden_n {
                    grow[j] += dlogit[c] * hidden[j];
                    dh[j] += dlogit[c] * row[j];
                }
            }
            for j in 0..hidden_n {
                let dz = dh[j] * (1.0 - hidden[j] * hidden[j]);
                gb1[j] += dz;
                let grow = &mut gw1[j * input..(j + 1) * input];
                for (g, v) in grow.iter_mut().zip(x.iter()) {
                    *g += dz * v;
                }
            }
        }
        total * scale
    }
}

fn log_softmax(logits: [f64; CLASSES]) -> [f64; CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.map(|l| l - lse)
}

/// Stochastic gradient descent with (PyTorch-style) momentum:
/// `v ← μ·v + g`, `p ← p − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        for ((p, v), g) in params.iter_mut().zip(self.velocity.iter_mut()).zip(grads) {
            *v = self.momentum * *v + g;
            *p -= self.learning_rate * *v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability of `label`.
    pub probability: f64,
    /// `[p(benign), p(anomaly)]`.
    pub scores: [f64; 2],
}

impl Prediction {
    /// Argmax with ties going to benign.
    pub fn from_scores(scores: [f64; 2]) -> Self {
        let label = if scores[1] > scores[0] {
            Label::Anomaly
        } else {
            Label::Benign
        };
        Self {
            label,
            probability: scores[label.index()],
            scores,
        }
    }

    pub fn from_anomaly_probability(p: f64) -> Self {
        Self::from_scores([1.0 - p, p])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub architecture: String,
    pub net: Mlp,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub train_config: TrainConfig,
}

impl ClassifierModel {
    pub fn class_labels(&self) -> [Label; 2] {
        [Label::Benign, Label::Anomaly]
    }

    pub fn input_len(&self) -> usize {
        self.net.input
    }

    /// Zero-mean, unit-variance features under the stored statistics.
    pub fn normalize(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        if fv.len() != self.net.input {
            return Err(Error::LengthMismatch {
                expected: self.net.input,
                found: fv.len(),
            });
        }
        Ok(fv
            .values()
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.architecture.len() as u32).to_le_bytes());
        out.extend_from_slice(self.architecture.as_bytes());
        for d in [self.net.input, self.net.hidden, CLASSES] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self
            .feature_mean
            .iter()
            .chain(&self.feature_std)
            .chain(&self.net.params)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let c = &self.train_config;
        out.extend_from_slice(&c.learning_rate.to_le_bytes());
        out.extend_from_slice(&c.momentum.to_le_bytes());
        for v in [c.batch_size as u64, c.epochs as u64, c.rng_seed] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(c.upsample_minority as u8);
        out.extend_from_slice(&c.train_fraction.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(r.error("bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.error(&format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let architecture = String::from_utf8(r.take(n)?.to_vec())
            .map_err(|_| r.error("architecture not UTF-8"))?;
        let (input, hidden, classes) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if classes != CLASSES || input == 0 || hidden == 0 {
            return Err(r.error("unsupported shape"));
        }
        let feature_mean = r.f64s(input)?;
        let feature_std = r.f64s(input)?;
        if feature_std.iter().any(|s| !(*s > 0.0)) {
            return Err(r.error("non-positive feature std"));
        }
        let params = r.f64s(Mlp::param_count(input, hidden))?;
        let train_config = TrainConfig {
            learning_rate: r.f64()?,
            momentum: r.f64()?,
            batch_size: r.u64()? as usize,
            epochs: r.u64()? as usize,
            rng_seed: r.u64()?,
            upsample_minority: r.take(1)?[0] != 0,
            train_fraction: r.f64()?,
        };
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes"));
        }
        Ok(Self {
            architecture,
            net: Mlp {
                input,
                hidden,
                params,
            },
            feature_mean,
            feature_std,
            train_config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

const MAGIC: &[u8; 8] = b"SUBSEGM\0";
const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, detail: &str) -> Error {
        Error::Format {
            what: "model file",
            detail: format!("{detail} at byte {}", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| self.error("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn predict(model: &ClassifierModel, fv: &FeatureVector) -> Result<Prediction> {
    let x = model.normalize(fv)?;
    Ok(Prediction::from_scores(
        log_softmax(model.net.logits(&x)).map(f64::exp),
    ))
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ClassifierModel,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
    /// Accuracy on the held-out share, when it is non-empty.
    pub validation_accuracy: Option<f64>,
}

/// Per-class stratified split into (fit, held-out) index sets.
fn stratified_split(
    labels: &[Label],
    fraction: f64,
    rng: &mut impl Rng,
) -> (Vec<usize>, Vec<usize>) {
    let (mut fit, mut held) = (Vec::new(), Vec::new());
    for class in [Label::Benign, Label::Anomaly] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_fit = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len());
        held.extend_from_slice(&idx[n_fit..]);
        idx.truncate(n_fit);
        fit.extend(idx);
    }
    (fit, held)
}

/// Indices for one epoch. With upsampling, every example appears once and
/// the minority class is topped up by sampling with replacement until both
/// classes have the majority count. The result is shuffled.
pub fn epoch_indices(labels: &[Label], upsample: bool, rng: &mut impl Rng) -> Vec<usize> {
    let mut out: Vec<usize> = (0..labels.len()).collect();
    if upsample {
        let anomalies: Vec<usize> = out
            .iter()
            .copied()
            .filter(|&i| labels[i] == Label::Anomaly)
            .collect();
        let benign: Vec<usize> = out
            .iter()
            .copied()
            .filter(|&i| labels[i] == Label::Benign)
            .collect();
        let (minority, deficit) = if anomalies.len() < benign.len() {
            (&anomalies, benign.len() - anomalies.len())
        } else {
            (&benign, anomalies.len() - benign.len())
        };
        if !minority.is_empty() {
            for _ in 0..deficit {
                out.push(minority[rng.random_range(0..minority.len())]);
            }
        }
    }
    out.shuffle(rng);
    out
}

pub fn train(examples: &[(FeatureVector, Label)], config: &TrainConfig) -> Result<Trained> {
    train_with_hidden(examples, config, HIDDEN)
}

pub fn train_with_hidden(
    examples: &[(FeatureVector, Label)],
    config: &TrainConfig,
    hidden: usize,
) -> Result<Trained> {
    config.validate()?;
    let Some(dim) = examples.first().map(|(f, _)| f.len()) else {
        return Err(Error::SingleClass);
    };
    for (i, (f, _)) in examples.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: f.len(),
            });
        }
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    let labels: Vec<Label> = examples.iter().map(|(_, l)| *l).collect();
    if !labels.contains(&Label::Anomaly) || !labels.contains(&Label::Benign) {
        return Err(Error::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (fit, held) = stratified_split(&labels, config.train_fraction, &mut rng);

    let n = fit.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in &fit {
        for (m, v) in mean.iter_mut().zip(examples[i].0.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for &i in &fit {
        for ((s, v), m) in std.iter_mut().zip(examples[i].0.values()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }

    let mut model = ClassifierModel {
        architecture: format!("mlp-tanh:{dim}-{hidden}-{CLASSES}"),
        net: Mlp::random(dim, hidden, &mut rng),
        feature_mean: mean,
        feature_std: std,
        train_config: config.clone(),
    };
    let xs: Vec<Vec<f64>> = fit
        .iter()
        .map(|&i| model.normalize(&examples[i].0))
        .collect::<Result<_>>()?;
    let ys: Vec<usize> = fit.iter().map(|&i| labels[i].index()).collect();
    let fit_labels: Vec<Label> = fit.iter().map(|&i| labels[i]).collect();

    let mut sgd = Sgd::new(
        config.learning_rate,
        config.momentum,
        model.net.params.len(),
    );
    let mut grad = vec![0.0; model.net.params.len()];
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut bx: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut by: Vec<usize> = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        let order = epoch_indices(&fit_labels, config.upsample_minority, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.push(&xs[i]);
                by.push(ys[i]);
            }
            let loss = model.net.accumulate(&bx, &by, &mut grad);
            epoch_loss += loss * batch.len() as f64;
            sgd.step(&mut model.net.params, &grad);
        }
        loss_history.push(epoch_loss / order.len() as f64);
    }

    let validation_accuracy = (!held.is_empty()).then(|| {
        let correct = held
            .iter()
            .filter(|&&i| matches!(predict(&model, &examples[i].0), Ok(p) if p.label == labels[i]))
            .count();
        correct as f64 / held.len() as f64
    });
    Ok(Trained {
        model,
        loss_history,
        validation_accuracy,
    })
}

/// Largest relative error between `grad` and fourth-order central
/// differences of `f` with step `epsilon`. Pairs where both magnitudes are
/// below `1e-10` count as zero error.
///
/// The five-point stencil keeps truncation at O(ε⁴), so a step near `1e-3`
/// resolves gradients down to ~1e-7 on saturated units, where the two-point
/// rule is limited by round-off.
pub fn finite_difference_check(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    grad: &[f64],
    epsilon: f64,
) -> f64 {
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        let mut at = |d: f64| {
            p[i] = orig + d;
            f(&p)
        };
        let near = at(epsilon) - at(-epsilon);
        let far = at(2.0 * epsilon) - at(-2.0 * epsilon);
        p[i] = orig;
        let numeric = (8.0 * near - far) / (12.0 * epsilon);
        let (a, n) = (grad[i].abs(), numeric.abs());
        if a < 1e-10 && n < 1e-10 {
            continue;
        }
        worst = worst.max((grad[i] - numeric).abs() / a.max(n));
    }
    worst
}

/// Compare the analytic loss gradient of `model` on `batch` (features are
/// normalised with the model's statistics) against central differences.
pub fn gradient_check(
    model: &ClassifierModel,
    batch: &[(FeatureVector, Label)],
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidParams("epsilon must lie in (0, 1e-2]".into()));
    }
    let xs: Vec<Vec<f64>> = batch
        .iter()
        .map(|(f, _)| model.normalize(f))
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let ys: Vec<usize> = batch.iter().map(|(_, l)| l.index()).collect();
    let (_, grad) = model.net.loss_and_grad(&refs, &ys);
    let mut probe = model.net.clone();
    Ok(finite_difference_check(
        |p| {
            probe.params.copy_from_slice(p);
            probe.loss(&refs, &ys)
        },
        &model.net.params,
        &grad,
        epsilon,
    ))
}

/// Anything that can label a region crop.
pub trait RegionScorer {
    fn score(&self, crop: &RegionCrop) -> Result<Prediction>;

    /// Score from a precomputed descriptor when the scorer supports it.
    fn score_features(&self, _name: &str, _features: &FeatureVector) -> Option<Result<Prediction>> {
        None
    }
}

impl RegionScorer for ClassifierModel {
    fn score(&self, crop: &RegionCrop) -> Result<Prediction> {
        predict(self, &featurize(crop))
    }

    fn score_features(&self, _name: &str, features: &FeatureVector) -> Option<Result<Prediction>> {
        Some(predict(self, features))
    }
}

/// Anomaly probabilities written by an external scorer as
/// `crop_filename,anomaly_probability` CSV (header row required).
#[derive(Debug, Clone, Default)]
pub struct ExternalScores {
    scores: HashMap<String, f64>,
}

impl ExternalScores {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            scores: pairs.into_iter().collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file)
    }

    pub fn read(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2
            || &headers[0] != "crop_filename"
            || &headers[1] != "anomaly_probability"
        {
            return Err(Error::Format {
                what: "scores csv",
                detail: "header must be `crop_filename,anomaly_probability`".into(),
            });
        }
        let mut scores = HashMap::new();
        for record in rdr.records() {
            let record = record?;
            let p: f64 = record[1].trim().parse().map_err(|_| Error::Format {
                what: "scores csv",
                detail: format!("bad probability `{}`", &record[1]),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Format {
                    what: "scores csv",
                    detail: format!("probability {p} outside [0, 1]"),
                });
            }
            scores.insert(record[0].trim().to_string(), p);
        }
        Ok(Self { scores })
    }

    pub fn get(&self, name: &str) -> Result<Prediction> {
        self.scores
            .get(name)
            .map(|&p| Prediction::from_anomaly_probability(p))
            .ok_or_else(|| Error::Format {
                what: "scores csv",
                detail: format!("no score for `{name}`"),
            })
    }
}

impl RegionScorer for ExternalScores {
    fn score(&self, crop: &RegionCrop) -> Result<Prediction> {
        self.get(&crop.file_name())
    }

    fn score_features(&self, name: &str, _features: &FeatureVector) -> Option<Result<Prediction>> {
        Some(self.get(name))
    }
}
