//! 8-bit sRGB to CIELAB (D65) conversion.

use std::sync::OnceLock;

use crate::{Error, Result};

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with one colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Copy of the sub-rectangle `[x0, x1) × [y0, y1)`.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Result<RgbImage> {
        if x1 <= x0 || y1 <= y0 || x1 > self.width || y1 > self.height {
            return Err(Error::OutOfBounds(format!(
                "crop ({x0},{y0})-({x1},{y1}) of {}x{} image",
                self.width, self.height
            )));
        }
        let w = x1 - x0;
        let mut data = Vec::with_capacity(w * (y1 - y0) * 3);
        for y in y0..y1 {
            let row = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[row..row + w * 3]);
        }
        RgbImage::new(w, y1 - y0, data)
    }
}

/// Row-major CIELAB raster, one `[L, a, b]` triple per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "Lab raster {width}x{height} with {} pixels",
                data.len()
            )));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite Lab component".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}

// sRGB primaries, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// Reference white is the image of (1,1,1) so neutral greys land on a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

fn linear_lut() -> &'static [f64; 256] {
    static LUT: OnceLock<[f64; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0.0; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            let c = i as f64 / 255.0;
            *v = if c <= 0.04045 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        lut
    })
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Convert one 8-bit sRGB triple to CIELAB.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lut = linear_lut();
    let lin = [
        lut[rgb[0] as usize],
        lut[rgb[1] as usize],
        lut[rgb[2] as usize],
    ];
    let mut xyz = [0.0; 3];
    for (row, out) in RGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Memoising converter for hot loops over images with long runs of equal
/// colours. Output is identical to [`rgb_to_lab`].
pub struct LabCache {
    slots: Vec<(u32, [f64; 3])>,
    shift: u32,
}

impl Default for LabCache {
    fn default() -> Self {
        Self::new()
    }
}

impl LabCache {
    const BITS: u32 = 12;

    pub fn new() -> Self {
        Self::with_bits(Self::BITS)
    }

    /// Cache with `2^bits` slots.
    pub fn with_bits(bits: u32) -> Self {
        assert!((1..=24).contains(&bits), "cache bits out of range");
        Self {
            slots: vec![(u32::MAX, [0.0; 3]); 1 << bits],
            shift: 32 - bits,
        }
    }

    #[inline]
    pub fn convert(&mut self, rgb: [u8; 3]) -> [f64; 3] {
        let key = (rgb[0] as u32) << 16 | (rgb[1] as u32) << 8 | rgb[2] as u32;
        let slot = (key.wrapping_mul(0x9E37_79B1) >> self.shift) as usize;
        let entry = &mut self.slots[slot];
        if entry.0 != key {
            *entry = (key, rgb_to_lab(rgb));
        }
        entry.1
    }
}

pub fn srgb_to_lab(img: &RgbImage) -> LabImage {
    let mut cache = LabCache::new();
    let data = img.pixels().map(|p| cache.convert(p)).collect();
    LabImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Squared central-difference gradient magnitude of the Lab vector at an
/// interior pixel.
pub fn lab_gradient(img: &LabImage, x: usize, y: usize) -> Result<f64> {
    let (w, h) = (img.width, img.height);
    if x < 1 || y < 1 || x + 2 > w || y + 2 > h {
        return Err(Error::OutOfRange {
            x,
            y,
            width: w,
            height: h,
        });
    }
    let sq = |p: [f64; 3], q: [f64; 3]| {
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)
    };
    Ok(sq(img.get(x + 1, y), img.get(x - 1, y)) + sq(img.get(x, y + 1), img.get(x, y - 1)))
}
