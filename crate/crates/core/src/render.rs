//! Contour overlays for segmentations and per-segment verdicts.

use crate::color::RgbImage;
use crate::slic::{SuperpixelMap, BACKGROUND};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlaySpec {
    pub contour_thickness: usize,
    pub segment_contour: [u8; 3],
    pub anomaly: [u8; 3],
    pub benign: [u8; 3],
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            contour_thickness: 2,
            segment_contour: [255, 105, 180],
            anomaly: [255, 0, 0],
            benign: [0, 255, 0],
        }
    }
}

impl OverlaySpec {
    pub fn validate(&self) -> Result<()> {
        if self.contour_thickness == 0 {
            return Err(Error::InvalidParams(
                "contour thickness must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// For every segment pixel, the labels that differ from its own within the
/// contour reach: offsets `-⌊t/2⌋..=⌈t/2⌉` along each axis. With thickness 2
/// this is exactly the 4-neighbourhood; a straight boundary becomes a line
/// `t` pixels wide. Background pixels are never painted.
fn boundary_visit(map: &SuperpixelMap, thickness: usize, mut f: impl FnMut(usize, u32, u32)) {
    let (w, h) = map.dims();
    let back = (thickness / 2) as i64;
    let fwd = thickness.div_ceil(2) as i64;
    let labels = map.labels();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let own = labels[p];
            if own == BACKGROUND {
                continue;
            }
            for d in -back..=fwd {
                if d == 0 {
                    continue;
                }
                let (xx, yy) = (x as i64 + d, y as i64 + d);
                if xx >= 0 && (xx as usize) < w {
                    let o = labels[y * w + xx as usize];
                    if o != own {
                        f(p, own, o);
                    }
                }
                if yy >= 0 && (yy as usize) < h {
                    let o = labels[yy as usize * w + x];
                    if o != own {
                        f(p, own, o);
                    }
                }
            }
        }
    }
}

fn check_dims(img: &RgbImage, map: &SuperpixelMap) -> Result<()> {
    if img.dims() != map.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: map.dims(),
        });
    }
    Ok(())
}

/// Paint segment boundaries with the contour colour.
pub fn draw_segment_contours(
    img: &RgbImage,
    map: &SuperpixelMap,
    spec: &OverlaySpec,
) -> Result<RgbImage> {
    check_dims(img, map)?;
    spec.validate()?;
    let mut out = img.clone();
    let w = map.width();
    boundary_visit(map, spec.contour_thickness, |p, _, _| {
        out.put(p % w, p / w, spec.segment_contour)
    });
    Ok(out)
}

/// Paint boundaries red for anomalous segments and green for benign ones.
/// A benign pixel within reach of an anomalous segment is painted red too.
pub fn draw_labeled_contours(
    img: &RgbImage,
    map: &SuperpixelMap,
    labels: &[Label],
    spec: &OverlaySpec,
) -> Result<RgbImage> {
    check_dims(img, map)?;
    spec.validate()?;
    if labels.len() < map.num_segments() {
        return Err(Error::MissingLabel(labels.len() as u32));
    }
    let mut out = img.clone();
    let w = map.width();
    let is_anomaly = |l: u32| l != BACKGROUND && labels[l as usize] == Label::Anomaly;
    let mut paint = vec![None; w * map.height()];
    boundary_visit(map, spec.contour_thickness, |p, own, other| {
        let red = is_anomaly(own) || is_anomaly(other);
        let slot: &mut Option<bool> = &mut paint[p];
        *slot = Some(slot.unwrap_or(false) || red);
    });
    for (p, v) in paint.into_iter().enumerate() {
        if let Some(red) = v {
            out.put(p % w, p / w, if red { spec.anomaly } else { spec.benign });
        }
    }
    Ok(out)
}
