//! Deterministic synthetic pseudo X-ray benchmark.
//!
//! Each image shows one false-colour "device" (a rounded rectangle with
//! internal board/battery structure and texture) on a white background. With
//! probability `anomaly_probability` a compact elliptical blob with a colour
//! from a separate palette is embedded inside it. Per-image random streams are
//! derived from `(rng_seed, image index)`, so any subset of images can be
//! regenerated independently.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::color::RgbImage;
use crate::isolate::{self, ObjectMask, WHITE};
use crate::regions::{RegionCrop, SegmentId};
use crate::slic::SuperpixelMap;
use crate::{io, Error, Label, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub image_w: usize,
    pub image_h: usize,
    /// Train-pool size.
    pub n_images: usize,
    /// Test-set size, generated after the train pool.
    pub n_test: usize,
    pub anomaly_probability: f64,
    /// Anomaly area as a fraction of the object area, sampled uniformly.
    pub anomaly_area_fraction: (f64, f64),
    /// Multiplier on the period of the device texture.
    pub texture_scale: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_w: 512,
            image_h: 512,
            n_images: 400,
            n_test: 200,
            anomaly_probability: 0.5,
            anomaly_area_fraction: (0.002, 0.02),
            texture_scale: 1.0,
            noise_sigma: 3.0,
            rng_seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.image_w < 64 || self.image_h < 64 {
            return bad("images must be at least 64x64");
        }
        if self.n_images == 0 {
            return bad("n_images must be positive");
        }
        if !(0.0..=1.0).contains(&self.anomaly_probability) {
            return bad("anomaly_probability must lie in [0, 1]");
        }
        let (lo, hi) = self.anomaly_area_fraction;
        if !(lo > 0.0 && lo <= hi && hi < 0.25) {
            return bad("anomaly area fraction range must lie in (0, 0.25)");
        }
        if !(self.texture_scale > 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("texture_scale must be positive and noise_sigma non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub object_mask: ObjectMask,
    pub anomaly_mask: ObjectMask,
    pub image_label: Label,
}

impl GroundTruth {
    pub fn new(object_mask: ObjectMask, anomaly_mask: ObjectMask) -> Result<Self> {
        if object_mask.dims() != anomaly_mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: object_mask.dims(),
                found: anomaly_mask.dims(),
            });
        }
        let image_label = if anomaly_mask.is_empty() {
            Label::Benign
        } else {
            Label::Anomaly
        };
        Ok(Self {
            object_mask,
            anomaly_mask,
            image_label,
        })
    }

    /// Load the masks of a manifest record.
    pub fn load(record: &ManifestRecord, base: &Path) -> Result<Self> {
        let object_mask = isolate::load_mask(base.join(&record.object_mask_path))?;
        let (w, h) = object_mask.dims();
        let anomaly_mask = match &record.anomaly_mask_path {
            Some(p) => isolate::load_mask_for(base.join(p), w, h)?,
            None => ObjectMask::empty(w, h)?,
        };
        let gt = Self::new(object_mask, anomaly_mask)?;
        if gt.image_label != record.image_label {
            return Err(Error::Format {
                what: "manifest",
                detail: format!("{}: label disagrees with anomaly mask", record.image_id),
            });
        }
        Ok(gt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    pub image_path: String,
    pub object_mask_path: String,
    pub anomaly_mask_path: Option<String>,
    pub image_label: Label,
    pub split: Split,
}

/// Dataset index; paths in records are relative to `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub base: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Read a JSON-lines manifest and check ids and referenced files.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
                what: "manifest",
                detail: format!("line {}: {e}", n + 1),
            })?;
            records.push(rec);
        }
        let m = Self { base, records };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(&r.image_id) {
                return Err(Error::Format {
                    what: "manifest",
                    detail: format!("duplicate image id `{}`", r.image_id),
                });
            }
            let files = [
                Some(&r.image_path),
                Some(&r.object_mask_path),
                r.anomaly_mask_path.as_ref(),
            ];
            for f in files.into_iter().flatten() {
                let p = self.base.join(f);
                if !p.is_file() {
                    return Err(Error::io(p, std::io::ErrorKind::NotFound.into()));
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r).expect("manifest record serialises");
            out.push(b'\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

/// A rendered sample before it is written to disk.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: RgbImage,
    pub truth: GroundTruth,
}

const DEVICE_PALETTE: [[f64; 3]; 4] = [
    [225.0, 160.0, 95.0],
    [205.0, 145.0, 80.0],
    [185.0, 195.0, 120.0],
    [215.0, 185.0, 135.0],
];

const ANOMALY_PALETTE: [[f64; 3]; 3] = [
    [45.0, 75.0, 190.0],
    [120.0, 45.0, 165.0],
    [25.0, 115.0, 135.0],
];

fn in_rounded_rect(x: f64, y: f64, r: (f64, f64, f64, f64), radius: f64) -> bool {
    let (x0, y0, x1, y1) = r;
    if x < x0 || y < y0 || x >= x1 || y >= y1 {
        return false;
    }
    let cx = x.clamp(x0 + radius, x1 - radius);
    let cy = y.clamp(y0 + radius, y1 - radius);
    (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius
}

/// Render image `index` of the dataset described by `cfg`.
pub fn render_sample(cfg: &SynthConfig, index: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index);
    let (w, h) = (cfg.image_w, cfg.image_h);
    let (wf, hf) = (w as f64, h as f64);

    let dw = rng.random_range(0.5..0.8) * wf;
    let dh = rng.random_range(0.4..0.7) * hf;
    let margin = 8.0;
    let dx0 = rng.random_range(margin..(wf - dw - margin)).floor();
    let dy0 = rng.random_range(margin..(hf - dh - margin)).floor();
    let dev = (dx0, dy0, dx0 + dw.floor(), dy0 + dh.floor());
    let radius = rng.random_range(0.05..0.12) * dw.min(dh);
    let base = DEVICE_PALETTE[rng.random_range(0..DEVICE_PALETTE.len())];

    // Internal components: a few darker rectangles plus a trace grid.
    let n_parts = rng.random_range(3..7);
    let parts: Vec<((f64, f64, f64, f64), f64)> = (0..n_parts)
        .map(|_| {
            let pw = rng.random_range(0.12..0.4) * dw;
            let ph = rng.random_range(0.12..0.4) * dh;
            let px = dev.0 + rng.random_range(0.05..0.95) * (dw - pw);
            let py = dev.1 + rng.random_range(0.05..0.95) * (dh - ph);
            ((px, py, px + pw, py + ph), rng.random_range(0.6..0.85))
        })
        .collect();
    let pitch = rng.random_range(18.0..32.0) * cfg.texture_scale;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);

    let object: Vec<bool> = (0..w * h)
        .map(|p| in_rounded_rect((p % w) as f64 + 0.5, (p / w) as f64 + 0.5, dev, radius))
        .collect();
    let object_count = object.iter().filter(|&&b| b).count() as f64;

    let anomalous = rng.random_bool(cfg.anomaly_probability);
    let mut anomaly = vec![false; w * h];
    let mut anomaly_color = [0.0; 3];
    let mut stripe = 0.0;
    if anomalous {
        let (lo, hi) = cfg.anomaly_area_fraction;
        let area = rng.random_range(lo..=hi) * object_count;
        let aspect = rng.random_range(0.5..2.0);
        let a = (area * aspect / std::f64::consts::PI).sqrt();
        let b = area / (std::f64::consts::PI * a);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let reach = a.max(b) + radius + 2.0;
        let cx = rng.random_range((dev.0 + reach)..(dev.2 - reach).max(dev.0 + reach + 1.0));
        let cy = rng.random_range((dev.1 + reach)..(dev.3 - reach).max(dev.1 + reach + 1.0));
        anomaly_color = ANOMALY_PALETTE[rng.random_range(0..ANOMALY_PALETTE.len())];
        stripe = rng.random_range(4.0..9.0);
        let (s, c) = theta.sin_cos();
        for (p, m) in anomaly.iter_mut().enumerate() {
            let (x, y) = ((p % w) as f64 + 0.5 - cx, (p / w) as f64 + 0.5 - cy);
            let (u, v) = (x * c + y * s, -x * s + y * c);
            *m = object[p] && (u / a).powi(2) + (v / b).powi(2) <= 1.0;
        }
        if !anomaly.iter().any(|&b| b) {
            // Degenerate tiny ellipse between pixel centres: keep its centre.
            let p = (cy as usize).min(h - 1) * w + (cx as usize).min(w - 1);
            anomaly[p] = object[p];
        }
    }

    let noise = Normal::new(0.0, cfg.noise_sigma.max(1e-12)).expect("valid sigma");
    let mut data = Vec::with_capacity(w * h * 3);
    for p in 0..w * h {
        let (x, y) = ((p % w) as f64 + 0.5, (p / w) as f64 + 0.5);
        let mut rgb = if !object[p] {
            [WHITE[0] as f64, WHITE[1] as f64, WHITE[2] as f64]
        } else if anomaly[p] {
            let t = 1.0 + 0.08 * ((x + y) / stripe).sin();
            anomaly_color.map(|c| c * t)
        } else {
            let mut shade = 1.0 + 0.06 * ((x / pitch + phase).sin() * (y / (pitch * 1.3)).cos());
            for &(r, dark) in &parts {
                if x >= r.0 && x < r.2 && y >= r.1 && y < r.3 {
                    shade *= dark;
                }
            }
            if ((x - dev.0) % pitch) < 1.5 || ((y - dev.1) % pitch) < 1.5 {
                shade *= 0.9;
            }
            base.map(|c| c * shade)
        };
        if cfg.noise_sigma > 0.0 {
            for c in rgb.iter_mut() {
                *c += noise.sample(&mut rng);
            }
        }
        data.extend(rgb.map(|c| c.round().clamp(0.0, 255.0) as u8));
    }

    Ok(Sample {
        image: RgbImage::new(w, h, data)?,
        truth: GroundTruth::new(
            ObjectMask::new(w, h, object)?,
            ObjectMask::new(w, h, anomaly)?,
        )?,
    })
}

/// Render and write the whole dataset plus `manifest.jsonl` into `out_dir`.
pub fn generate_dataset(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    for d in [
        out_dir.to_path_buf(),
        out_dir.join("images"),
        out_dir.join("masks"),
    ] {
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let total = cfg.n_images + cfg.n_test;
    let mut records = Vec::with_capacity(total);
    for i in 0..total {
        let sample = render_sample(cfg, i as u64)?;
        let id = format!("img_{i:05}");
        let image_path = format!("images/{id}.png");
        let object_mask_path = format!("masks/{id}_object.png");
        io::write_rgb(out_dir.join(&image_path), &sample.image)?;
        sample
            .truth
            .object_mask
            .save(out_dir.join(&object_mask_path))?;
        let anomaly_mask_path = if sample.truth.image_label == Label::Anomaly {
            let p = format!("masks/{id}_anomaly.png");
            sample.truth.anomaly_mask.save(out_dir.join(&p))?;
            Some(p)
        } else {
            None
        };
        records.push(ManifestRecord {
            image_id: id,
            image_path,
            object_mask_path,
            anomaly_mask_path,
            image_label: sample.truth.image_label,
            split: if i < cfg.n_images {
                Split::Train
            } else {
                Split::Test
            },
        });
    }
    let manifest = DatasetManifest {
        base: out_dir.to_path_buf(),
        records,
    };
    manifest.write(out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// Ground-truth label of each crop. A sub-component crop is an anomaly when
/// at least `tau` of its segment's pixels are anomalous; an object crop is an
/// anomaly when the image contains any anomaly.
pub fn label_regions(
    crops: &[RegionCrop],
    map: Option<&SuperpixelMap>,
    gt: &GroundTruth,
    tau: f64,
) -> Result<Vec<Label>> {
    let (w, h) = gt.object_mask.dims();
    let mut overlap: Option<(Vec<usize>, Vec<usize>)> = None;
    crops
        .iter()
        .map(|crop| {
            let b = crop.source_box;
            if b.x1 > w || b.y1 > h || b.x1 <= b.x0 || b.y1 <= b.y0 {
                return Err(Error::OutOfBounds(format!(
                    "box ({},{})-({},{}) in a {w}x{h} image",
                    b.x0, b.y0, b.x1, b.y1
                )));
            }
            match crop.segment_id {
                SegmentId::Object => Ok(gt.image_label),
                SegmentId::Segment(id) => {
                    let map = map.ok_or_else(|| {
                        Error::InvalidParams("sub-component crops need their label map".into())
                    })?;
                    if map.dims() != (w, h) {
                        return Err(Error::DimensionMismatch {
                            expected: (w, h),
                            found: map.dims(),
                        });
                    }
                    let (sizes, hits) =
                        overlap.get_or_insert_with(|| segment_overlap(map, &gt.anomaly_mask));
                    let id = id as usize;
                    if id >= sizes.len() {
                        return Err(Error::OutOfBounds(format!("segment {id} not in map")));
                    }
                    let frac = hits[id] as f64 / sizes[id] as f64;
                    Ok(if frac >= tau && hits[id] > 0 {
                        Label::Anomaly
                    } else {
                        Label::Benign
                    })
                }
            }
        })
        .collect()
}

/// Per-segment (pixel count, anomalous pixel count).
fn segment_overlap(map: &SuperpixelMap, anomaly: &ObjectMask) -> (Vec<usize>, Vec<usize>) {
    let mut sizes = vec![0; map.num_segments()];
    let mut hits = vec![0; map.num_segments()];
    for (&l, &a) in map.labels().iter().zip(anomaly.bits()) {
        if (l as usize) < sizes.len() {
            sizes[l as usize] += 1;
            hits[l as usize] += a as usize;
        }
    }
    (sizes, hits)
}
