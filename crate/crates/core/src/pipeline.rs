//! Per-image processing shared by training, evaluation and export:
//! isolate the object, optionally over-segment it, extract crops, label them
//! against ground truth and featurize them.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::classify::{featurize, FeatureVector, Prediction, RegionScorer};
use crate::color::{srgb_to_lab, RgbImage};
use crate::isolate::{self, ObjectMask};
use crate::regions::{self, RegionCrop};
use crate::slic::{self, SlicParams, SuperpixelMap};
use crate::synthgen::{self, DatasetManifest, GroundTruth, ManifestRecord, Split};
use crate::{io, Error, Label, Level, Result};

/// Where the object mask comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSource {
    /// The manifest's object mask.
    GroundTruth,
    /// [`isolate::threshold_segment`] with this luminance threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub slic: SlicParams,
    /// Minimum anomalous share of a superpixel for an anomaly label.
    pub label_tau: f64,
    pub mask_source: MaskSource,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            slic: SlicParams::default(),
            label_tau: 0.25,
            mask_source: MaskSource::GroundTruth,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionSample {
    /// Export file name of the crop.
    pub name: String,
    pub features: FeatureVector,
    pub truth: Label,
}

#[derive(Debug, Clone)]
pub struct ImageRegions {
    pub image_id: String,
    pub image_label: Label,
    pub regions: Vec<RegionSample>,
    /// Wall time from loaded pixels to features.
    pub elapsed: Duration,
}

/// Over-segment the object under `mask` into superpixels.
pub fn segment_object(
    img: &RgbImage,
    mask: &ObjectMask,
    params: &SlicParams,
) -> Result<SuperpixelMap> {
    let lab = srgb_to_lab(img);
    Ok(slic::segment_masked(&lab, Some(mask.bits()), params)?.map)
}

/// Crops of one image at `level` with their ground-truth labels.
pub fn image_crops(
    img: &RgbImage,
    image_id: &str,
    gt: &GroundTruth,
    level: Level,
    params: &PipelineParams,
) -> Result<Vec<(RegionCrop, Label)>> {
    let mask = match params.mask_source {
        MaskSource::GroundTruth => gt.object_mask.clone(),
        MaskSource::Threshold(t) => isolate::threshold_segment(img, t)?,
    };
    let (crops, map) = match level {
        Level::Object => (
            vec![regions::extract_object_region(img, &mask, image_id)?],
            None,
        ),
        Level::Subcomponent => {
            let map = segment_object(img, &mask, &params.slic)?;
            (
                regions::extract_subcomponent_regions(img, &map, image_id)?,
                Some(map),
            )
        }
    };
    let labels = synthgen::label_regions(&crops, map.as_ref(), gt, params.label_tau)?;
    Ok(crops.into_iter().zip(labels).collect())
}

fn load_record(record: &ManifestRecord, base: &Path) -> Result<(RgbImage, GroundTruth)> {
    let img = io::read_rgb(base.join(&record.image_path))?;
    let gt = GroundTruth::load(record, base)?;
    if gt.object_mask.dims() != img.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: gt.object_mask.dims(),
        });
    }
    Ok((img, gt))
}

pub fn prepare_image(
    record: &ManifestRecord,
    base: &Path,
    level: Level,
    params: &PipelineParams,
) -> Result<ImageRegions> {
    let (img, gt) = load_record(record, base)?;
    let start = Instant::now();
    let regions = image_crops(&img, &record.image_id, &gt, level, params)?
        .into_iter()
        .map(|(crop, truth)| RegionSample {
            name: crop.file_name(),
            features: featurize(&crop),
            truth,
        })
        .collect();
    Ok(ImageRegions {
        image_id: record.image_id.clone(),
        image_label: record.image_label,
        regions,
        elapsed: start.elapsed(),
    })
}

pub fn prepare_split(
    manifest: &DatasetManifest,
    split: Split,
    level: Level,
    params: &PipelineParams,
) -> Result<Vec<ImageRegions>> {
    manifest
        .split(split)
        .map(|r| prepare_image(r, &manifest.base, level, params))
        .collect()
}

pub fn training_examples(images: &[ImageRegions]) -> Vec<(FeatureVector, Label)> {
    images
        .iter()
        .flat_map(|i| i.regions.iter().map(|r| (r.features.clone(), r.truth)))
        .collect()
}

/// Name of the request manifest written next to exported crops.
pub const REQUEST_NAME: &str = "request.csv";

/// Write every crop of `split` at `level` as PNG into `dir`, plus a
/// `request.csv` (`crop_filename,image_id,level,segment_id`) listing them.
/// Returns the number of crops.
pub fn export_crops(
    manifest: &DatasetManifest,
    split: Split,
    level: Level,
    params: &PipelineParams,
    dir: &Path,
) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let request = dir.join(REQUEST_NAME);
    let mut wtr = csv::Writer::from_path(&request)?;
    wtr.write_record(["crop_filename", "image_id", "level", "segment_id"])?;
    let mut n = 0;
    for record in manifest.split(split) {
        let (img, gt) = load_record(record, &manifest.base)?;
        for (crop, _) in image_crops(&img, &record.image_id, &gt, level, params)? {
            let name = crop.file_name();
            io::write_rgb(dir.join(&name), &crop.pixels)?;
            wtr.write_record([
                name.as_str(),
                crop.source_image_id.as_str(),
                crop.level.as_str(),
                &crop.segment_id.to_string(),
            ])?;
            n += 1;
        }
    }
    wtr.flush().map_err(|e| Error::io(&request, e))?;
    Ok(n)
}

/// Everything the single-image path produces.
#[derive(Debug, Clone)]
pub struct ImageAnalysis {
    pub mask: ObjectMask,
    pub map: SuperpixelMap,
    pub crops: Vec<RegionCrop>,
    pub predictions: Vec<Prediction>,
    pub elapsed: Duration,
}

/// Threshold segmentation → SLIC → extraction → scoring for one image.
pub fn analyze_image(
    img: &RgbImage,
    image_id: &str,
    threshold: f64,
    slic_params: &SlicParams,
    scorer: &dyn RegionScorer,
) -> Result<ImageAnalysis> {
    let start = Instant::now();
    let mask = isolate::threshold_segment(img, threshold)?;
    let map = segment_object(img, &mask, slic_params)?;
    let crops = regions::extract_subcomponent_regions(img, &map, image_id)?;
    let predictions = crops
        .iter()
        .map(|c| scorer.score(c))
        .collect::<Result<_>>()?;
    Ok(ImageAnalysis {
        mask,
        map,
        crops,
        predictions,
        elapsed: start.elapsed(),
    })
}
