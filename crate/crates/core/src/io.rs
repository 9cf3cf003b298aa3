//! PNG and label-map file formats.
//!
//! Label maps are stored as a 16-bit grayscale PNG (background = 65535) with a
//! `key=value` sidecar next to it (`labels.png` -> `labels.hdr`):
//!
//! ```text
//! width=512
//! height=512
//! num_segments=251
//! k=256
//! m=20
//! max_iters=10
//! residual_threshold=1
//! enforce_connectivity=true
//! min_segment_fraction=0.25
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use crate::color::RgbImage;
use crate::slic::{SlicParams, SuperpixelMap, BACKGROUND};
use crate::{Error, Result};

/// Background value in 16-bit label PNGs.
pub const PNG_BACKGROUND: u16 = u16::MAX;

fn open(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(image::load_from_memory_with_format(
        &bytes,
        image::ImageFormat::Png,
    )?)
}

/// Read an 8-bit PNG as RGB; alpha is dropped and grey is expanded.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = open(path)?;
    match img {
        DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_)
        | DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_) => {}
        other => {
            return Err(Error::InvalidImage(format!(
                "{}: unsupported colour type {:?}",
                path.display(),
                other.color()
            )))
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    RgbImage::new(w, h, rgb.into_raw())
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<image::Rgb<u8>, _> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
            .expect("buffer length checked by RgbImage");
    save(path, DynamicImage::ImageRgb8(buf))
}

/// Read an 8-bit single-channel PNG.
pub fn read_gray8(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    match open(path)? {
        DynamicImage::ImageLuma8(buf) => {
            Ok((buf.width() as usize, buf.height() as usize, buf.into_raw()))
        }
        other => Err(Error::InvalidImage(format!(
            "{}: expected 8-bit grayscale, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn write_gray8(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    data: Vec<u8>,
) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Error::InvalidImage("gray buffer length".into()))?;
    save(path.as_ref(), DynamicImage::ImageLuma8(buf))
}

fn save(path: &Path, img: DynamicImage) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageFormat::Png,
    )?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Sidecar path for a label-map PNG.
pub fn header_path(png: &Path) -> PathBuf {
    png.with_extension("hdr")
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, what: &'static str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            what,
            detail: format!("expected key=value, got `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMapHeader {
    pub width: usize,
    pub height: usize,
    pub num_segments: usize,
    pub params: Option<SlicParams>,
}

pub fn write_label_map(
    png: impl AsRef<Path>,
    map: &SuperpixelMap,
    params: Option<&SlicParams>,
) -> Result<()> {
    let png = png.as_ref();
    if map.num_segments() >= PNG_BACKGROUND as usize {
        return Err(Error::InvalidParams(format!(
            "{} segments do not fit a 16-bit label map",
            map.num_segments()
        )));
    }
    let data: Vec<u16> = map
        .labels()
        .iter()
        .map(|&l| {
            if l == BACKGROUND {
                PNG_BACKGROUND
            } else {
                l as u16
            }
        })
        .collect();
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, data).expect("map dims");
    save(png, DynamicImage::ImageLuma16(buf))?;

    let mut hdr = format!(
        "width={}\nheight={}\nnum_segments={}\n",
        map.width(),
        map.height(),
        map.num_segments()
    );
    if let Some(p) = params {
        hdr.push_str(&format!(
            "k={}\nm={}\nmax_iters={}\nresidual_threshold={}\nenforce_connectivity={}\nmin_segment_fraction={}\n",
            p.k, p.m, p.max_iters, p.residual_threshold, p.enforce_connectivity, p.min_segment_fraction
        ));
    }
    let hp = header_path(png);
    fs::write(&hp, hdr).map_err(|e| Error::io(hp, e))
}

fn field<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let v = kv.get(key).ok_or_else(|| Error::Format {
        what: "label map header",
        detail: format!("missing `{key}`"),
    })?;
    v.parse().map_err(|_| Error::Format {
        what: "label map header",
        detail: format!("bad value for `{key}`: `{v}`"),
    })
}

pub fn read_label_map(png: impl AsRef<Path>) -> Result<(SuperpixelMap, LabelMapHeader)> {
    let png = png.as_ref();
    let hp = header_path(png);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let kv = parse_key_values(&text, "label map header")?;
    let params = if kv.contains_key("k") {
        Some(SlicParams {
            k: field(&kv, "k")?,
            m: field(&kv, "m")?,
            max_iters: field(&kv, "max_iters")?,
            residual_threshold: field(&kv, "residual_threshold")?,
            enforce_connectivity: field(&kv, "enforce_connectivity")?,
            min_segment_fraction: field(&kv, "min_segment_fraction")?,
        })
    } else {
        None
    };
    let header = LabelMapHeader {
        width: field(&kv, "width")?,
        height: field(&kv, "height")?,
        num_segments: field(&kv, "num_segments")?,
        params,
    };
    let buf = match open(png)? {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::InvalidImage(format!(
                "{}: expected 16-bit grayscale, found {:?}",
                png.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    if (w, h) != (header.width, header.height) {
        return Err(Error::DimensionMismatch {
            expected: (header.width, header.height),
            found: (w, h),
        });
    }
    let labels = buf
        .into_raw()
        .into_iter()
        .map(|v| {
            if v == PNG_BACKGROUND {
                BACKGROUND
            } else {
                v as u32
            }
        })
        .collect();
    let map = SuperpixelMap::new(w, h, labels)?;
    if map.num_segments() != header.num_segments {
        return Err(Error::Format {
            what: "label map header",
            detail: format!(
                "header declares {} segments, raster has {}",
                header.num_segments,
                map.num_segments()
            ),
        });
    }
    Ok((map, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("labels.png");
        let labels = vec![0, 1, BACKGROUND, 2, 2, 1];
        let map = SuperpixelMap::new(3, 2, labels).unwrap();
        let params = SlicParams::with_k(3);
        write_label_map(&png, &map, Some(&params)).unwrap();
        let (back, hdr) = read_label_map(&png).unwrap();
        assert_eq!(back, map);
        assert_eq!(hdr.num_segments, 3);
        assert_eq!(hdr.params, Some(params));
        let text = fs::read_to_string(dir.path().join("labels.hdr")).unwrap();
        assert!(text.starts_with("width=3\nheight=2\nnum_segments=3\n"));
    }

    #[test]
    fn rgb_round_trip_and_gray_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = RgbImage::new(2, 1, vec![1, 2, 3, 250, 251, 252]).unwrap();
        write_rgb(&p, &img).unwrap();
        assert_eq!(read_rgb(&p).unwrap(), img);
        assert!(matches!(read_gray8(&p), Err(Error::InvalidImage(_))));
        assert!(matches!(
            read_rgb(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }
}
