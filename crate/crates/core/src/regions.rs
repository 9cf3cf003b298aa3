//! Classifier-ready region crops: mask out, pad to the target aspect ratio,
//! resample to the level's fixed size.

use crate::color::RgbImage;
use crate::isolate::{ObjectMask, WHITE};
use crate::slic::{SuperpixelMap, BACKGROUND};
use crate::{Error, Level, Result};

/// Source rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl SourceBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    fn include(&mut self, x: usize, y: usize) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x + 1);
        self.y1 = self.y1.max(y + 1);
    }

    fn point(x: usize, y: usize) -> Self {
        Self {
            x0: x,
            y0: y,
            x1: x + 1,
            y1: y + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentId {
    /// The whole isolated object.
    Object,
    Segment(u32),
}

impl std::fmt::Display for SegmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentId::Object => f.write_str("object"),
            SegmentId::Segment(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCrop {
    pub pixels: RgbImage,
    pub source_box: SourceBox,
    pub segment_id: SegmentId,
    pub level: Level,
    pub source_image_id: String,
}

impl RegionCrop {
    /// Export name `<image_id>_<level>_<segment_id>.png`.
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}.png",
            self.source_image_id, self.level, self.segment_id
        )
    }
}

/// Pad `img` symmetrically with `fill` to the target aspect ratio, then
/// resample bilinearly to `target_w × target_h`.
pub fn pad_rescale(img: &RgbImage, target_w: usize, target_h: usize, fill: [u8; 3]) -> RgbImage {
    assert!(target_w > 0 && target_h > 0, "target size must be positive");
    let (w, h) = img.dims();
    let (pw, ph) = match (w * target_h).cmp(&(h * target_w)) {
        std::cmp::Ordering::Greater => {
            let ph = (w as f64 * target_h as f64 / target_w as f64).round() as usize;
            (w, ph.max(h))
        }
        std::cmp::Ordering::Less => {
            let pw = (h as f64 * target_w as f64 / target_h as f64).round() as usize;
            (pw.max(w), h)
        }
        std::cmp::Ordering::Equal => (w, h),
    };
    let (ox, oy) = ((pw - w) / 2, (ph - h) / 2);

    // Per-axis taps in padded coordinates, pixel-centre aligned.
    let taps = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xt = taps(pw, target_w);
    let yt = taps(ph, target_h);

    // Separable: resample every padded row along x, then blend row pairs.
    let row_w = target_w * 3;
    let resample_row = |src: Option<usize>, out: &mut [f64]| {
        for (o, &(x0, x1, fx)) in out.chunks_exact_mut(3).zip(&xt) {
            let at = |px: usize| match src {
                Some(sy) if px >= ox && px < ox + w => img.get(px - ox, sy),
                _ => fill,
            };
            let (p0, p1) = (at(x0), at(x1));
            for c in 0..3 {
                o[c] = p0[c] as f64 * (1.0 - fx) + p1[c] as f64 * fx;
            }
        }
    };
    let mut fill_row = vec![0.0; row_w];
    resample_row(None, &mut fill_row);
    let mut rows = vec![0.0; h * row_w];
    for (sy, out) in rows.chunks_exact_mut(row_w).enumerate() {
        resample_row(Some(sy), out);
    }
    let row = |py: usize| -> &[f64] {
        if py >= oy && py < oy + h {
            &rows[(py - oy) * row_w..][..row_w]
        } else {
            &fill_row
        }
    };

    let mut data = Vec::with_capacity(target_w * target_h * 3);
    for &(y0, y1, fy) in &yt {
        let (top, bottom) = (row(y0), row(y1));
        data.extend(top.iter().zip(bottom).map(|(&t, &b)| {
            // Convex blend of bytes, so the value is already in [0, 255].
            (t * (1.0 - fy) + b * fy + 0.5) as u8
        }));
    }
    RgbImage::new(target_w, target_h, data).expect("target dims")
}

fn masked_crop(
    img: &RgbImage,
    b: SourceBox,
    member: impl Fn(usize, usize) -> bool,
    fill: [u8; 3],
) -> RgbImage {
    let mut data = Vec::with_capacity(b.width() * b.height() * 3);
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            data.extend_from_slice(&if member(x, y) { img.get(x, y) } else { fill });
        }
    }
    RgbImage::new(b.width(), b.height(), data).expect("non-degenerate box")
}

/// Whole-object crop at 224×224 with white fill outside the mask.
pub fn extract_object_region(
    img: &RgbImage,
    mask: &ObjectMask,
    image_id: &str,
) -> Result<RegionCrop> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: mask.dims(),
        });
    }
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(Error::EmptyMask)?;
    let source_box = SourceBox { x0, y0, x1, y1 };
    let raw = masked_crop(img, source_box, |x, y| mask.get(x, y), WHITE);
    let (tw, th) = Level::Object.target_size();
    Ok(RegionCrop {
        pixels: pad_rescale(&raw, tw, th, WHITE),
        source_box,
        segment_id: SegmentId::Object,
        level: Level::Object,
        source_image_id: image_id.to_string(),
    })
}

/// Bounding box of every segment, indexed by segment id.
pub fn segment_boxes(map: &SuperpixelMap) -> Vec<SourceBox> {
    let mut boxes: Vec<Option<SourceBox>> = vec![None; map.num_segments()];
    let w = map.width();
    for (p, &l) in map.labels().iter().enumerate() {
        if l == BACKGROUND {
            continue;
        }
        let (x, y) = (p % w, p / w);
        match &mut boxes[l as usize] {
            Some(b) => b.include(x, y),
            slot => *slot = Some(SourceBox::point(x, y)),
        }
    }
    boxes
        .into_iter()
        .map(|b| b.expect("dense labels"))
        .collect()
}

/// One 190×150 crop per segment, ascending by id.
pub fn extract_subcomponent_regions(
    img: &RgbImage,
    map: &SuperpixelMap,
    image_id: &str,
) -> Result<Vec<RegionCrop>> {
    if img.dims() != map.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: map.dims(),
        });
    }
    let (tw, th) = Level::Subcomponent.target_size();
    Ok(segment_boxes(map)
        .into_iter()
        .enumerate()
        .map(|(id, source_box)| {
            let id = id as u32;
            let raw = masked_crop(img, source_box, |x, y| map.label(x, y) == id, WHITE);
            RegionCrop {
                pixels: pad_rescale(&raw, tw, th, WHITE),
                source_box,
                segment_id: SegmentId::Segment(id),
                level: Level::Subcomponent,
                source_image_id: image_id.to_string(),
            }
        })
        .collect())
}
