//! Object-level isolation from binary masks.

use std::path::Path;

use crate::color::RgbImage;
use crate::grid;
use crate::{io, Error, Result};

/// Default fill colour for pixels outside an isolated object.
pub const WHITE: [u8; 3] = [255, 255, 255];

/// Row-major binary membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ObjectMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask {width}x{height} with {} entries",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight bounding box `(x0, y0, x1, y1)` with exclusive ends.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i % self.width, i / self.width);
            bb = Some(match bb {
                None => (x, y, x + 1, y + 1),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
            });
        }
        bb
    }

    /// 8-bit encoding, 255 = member.
    pub fn to_gray(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_gray8(path, self.width, self.height, self.to_gray())
    }
}

/// Load an 8-bit grayscale PNG mask; values above 127 are members.
pub fn load_mask(path: impl AsRef<Path>) -> Result<ObjectMask> {
    let (w, h, data) = io::read_gray8(path)?;
    ObjectMask::new(w, h, data.into_iter().map(|v| v > 127).collect())
}

/// [`load_mask`] plus a check against the paired image's dimensions.
pub fn load_mask_for(path: impl AsRef<Path>, width: usize, height: usize) -> Result<ObjectMask> {
    let mask = load_mask(path)?;
    if mask.dims() != (width, height) {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            found: mask.dims(),
        });
    }
    Ok(mask)
}

#[inline]
pub fn luminance(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Stand-in object detector: pixels whose luminance differs from the border
/// median by more than `threshold`, reduced to the largest 4-connected
/// component (earliest in raster order on ties).
pub fn threshold_segment(img: &RgbImage, threshold: f64) -> Result<ObjectMask> {
    let (w, h) = img.dims();
    let mut border: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| x == 0 || y == 0 || x + 1 == w || y + 1 == h)
        .map(|(x, y)| luminance(img.get(x, y)))
        .collect();
    border.sort_by(f64::total_cmp);
    let reference = border[(border.len() - 1) / 2];

    let fg: Vec<u32> = img
        .pixels()
        .map(|p| ((luminance(p) - reference).abs() > threshold) as u32)
        .collect();
    let (ids, comps) = grid::components(w, h, &fg, Some(0));
    let best = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.size.cmp(&b.size).then(ib.cmp(ia)))
        .map(|(i, _)| i as u32)
        .ok_or(Error::NoForeground)?;
    ObjectMask::new(w, h, ids.iter().map(|&c| c == best).collect())
}

/// Keep member pixels, replace the rest with `fill`.
pub fn apply_mask(img: &RgbImage, mask: &ObjectMask, fill: [u8; 3]) -> Result<RgbImage> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: mask.dims(),
        });
    }
    let data = img
        .pixels()
        .zip(&mask.bits)
        .flat_map(|(p, &m)| if m { p } else { fill })
        .collect();
    RgbImage::new(img.width(), img.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_on_white(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> RgbImage {
        let mut img = RgbImage::filled(w, h, WHITE).unwrap();
        for &(x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    img.put(x, y, [40, 60, 80]);
                }
            }
        }
        img
    }

    #[test]
    fn uniform_has_no_foreground() {
        let img = RgbImage::filled(10, 10, [90, 90, 90]).unwrap();
        assert!(matches!(
            threshold_segment(&img, 30.0),
            Err(Error::NoForeground)
        ));
    }

    #[test]
    fn dark_rectangle_exact() {
        let img = rect_on_white(40, 30, &[(5, 7, 25, 20)]);
        let mask = threshold_segment(&img, 30.0).unwrap();
        assert_eq!(mask.count(), 20 * 13);
        assert_eq!(mask.bounding_box(), Some((5, 7, 25, 20)));
    }

    #[test]
    fn larger_blob_wins() {
        let img = rect_on_white(40, 30, &[(2, 2, 6, 6), (10, 10, 30, 25)]);
        let mask = threshold_segment(&img, 30.0).unwrap();
        assert_eq!(mask.bounding_box(), Some((10, 10, 30, 25)));
        assert!(!mask.get(3, 3));
    }

    #[test]
    fn apply_mask_cases() {
        let img = rect_on_white(6, 4, &[(1, 1, 5, 3)]);
        let all = ObjectMask::new(6, 4, vec![true; 24]).unwrap();
        assert_eq!(apply_mask(&img, &all, WHITE).unwrap(), img);
        let none = ObjectMask::empty(6, 4).unwrap();
        assert_eq!(
            apply_mask(&img, &none, [1, 2, 3]).unwrap(),
            RgbImage::filled(6, 4, [1, 2, 3]).unwrap()
        );
        let half = ObjectMask::new(6, 4, (0..24).map(|p| p % 6 < 3).collect()).unwrap();
        let out = apply_mask(&img, &half, WHITE).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                let expected = if x < 3 { img.get(x, y) } else { WHITE };
                assert_eq!(out.get(x, y), expected);
            }
        }
        assert_eq!(apply_mask(&out, &half, WHITE).unwrap(), out);
        let wrong = ObjectMask::empty(5, 4).unwrap();
        assert!(matches!(
            apply_mask(&img, &wrong, WHITE),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mask_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        io::write_gray8(
            &p,
            4,
            2,
            (0..8).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect(),
        )
        .unwrap();
        let m = load_mask(&p).unwrap();
        assert_eq!(
            m.bits(),
            &[false, true, false, true, false, true, false, true]
        );
        assert!(load_mask_for(&p, 4, 2).is_ok());
        assert!(matches!(
            load_mask_for(&p, 4, 3),
            Err(Error::DimensionMismatch { .. })
        ));
        io::write_gray8(&p, 3, 3, vec![255; 9]).unwrap();
        assert!(load_mask(&p).unwrap().bits().iter().all(|&b| b));
        io::write_gray8(&p, 3, 3, vec![0; 9]).unwrap();
        assert!(load_mask(&p).unwrap().is_empty());
        let rgb = dir.path().join("rgb.png");
        io::write_rgb(&rgb, &RgbImage::filled(2, 2, WHITE).unwrap()).unwrap();
        assert!(matches!(load_mask(&rgb), Err(Error::InvalidImage(_))));
        assert!(matches!(
            load_mask(dir.path().join("nope.png")),
            Err(Error::Io { .. })
        ));
    }
}
