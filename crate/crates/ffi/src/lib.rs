//! C ABI over the `subseg` pipeline.
//!
//! Every fallible call returns a [`SubsegStatus`]; on failure the message is
//! available from [`subseg_last_error`] until the next call on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. The header is generated into `include/subseg.h` at build time.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subseg::classify::{self, ClassifierModel};
use subseg::color::{self, LabImage, RgbImage};
use subseg::eval::{self, ConfusionCounts};
use subseg::slic::{self, ClusterCenter, SlicParams, SuperpixelMap};
use subseg::{isolate, Error, ErrorKind, Label};

/// Call outcome. Non-zero values mirror the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsegStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    IoError = 3,
    NullPointer = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with_borrow_mut(|e| *e = Some(c));
}

fn fail(status: SubsegStatus, msg: impl Into<String>) -> SubsegStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SubsegStatus {
    let status = match e.kind() {
        ErrorKind::Usage => SubsegStatus::InvalidArgument,
        ErrorKind::Data => SubsegStatus::DataError,
        ErrorKind::Io => SubsegStatus::IoError,
    };
    fail(status, e.to_string())
}

/// Clear the last error, run `f`, and turn errors and panics into statuses.
fn guard(f: impl FnOnce() -> Result<(), SubsegStatus>) -> SubsegStatus {
    LAST_ERROR.with_borrow_mut(|e| *e = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SubsegStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SubsegStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: subseg::Result<T>) -> Result<T, SubsegStatus> {
    r.map_err(from_error)
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), SubsegStatus> {
    if p.is_null() {
        Err(fail(SubsegStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `rgb` must point to `width * height * 3` readable bytes.
unsafe fn read_rgb(rgb: *const u8, width: usize, height: usize) -> Result<RgbImage, SubsegStatus> {
    non_null(rgb, "rgb")?;
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| fail(SubsegStatus::InvalidArgument, "image size overflows"))?;
    let data = std::slice::from_raw_parts(rgb, len).to_vec();
    check(RgbImage::new(width, height, data))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn subseg_last_error() -> *const c_char {
    LAST_ERROR.with_borrow(|e| e.as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Convert one 8-bit sRGB triple to CIELAB (D65).
///
/// # Safety
/// `rgb` must point to 3 bytes and `lab_out` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn subseg_srgb_to_lab(rgb: *const u8, lab_out: *mut f64) -> SubsegStatus {
    guard(|| {
        non_null(rgb, "rgb")?;
        non_null(lab_out, "lab_out")?;
        let p = std::slice::from_raw_parts(rgb, 3);
        let lab = color::rgb_to_lab([p[0], p[1], p[2]]);
        std::slice::from_raw_parts_mut(lab_out, 3).copy_from_slice(&lab);
        Ok(())
    })
}

/// Combined colour and spatial distance between a center `(l, a, b, x, y)`
/// and a pixel `(l, a, b, x, y)` for compactness `m` and grid interval `s`.
///
/// # Safety
/// `center` and `pixel` must each point to 5 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subseg_labxy_distance(
    center: *const f64,
    pixel: *const f64,
    m: f64,
    s: f64,
    out: *mut f64,
) -> SubsegStatus {
    guard(|| {
        non_null(center, "center")?;
        non_null(pixel, "pixel")?;
        non_null(out, "out")?;
        if !(s > 0.0) || !(m >= 0.0) {
            return Err(fail(SubsegStatus::InvalidArgument, "need s > 0 and m >= 0"));
        }
        let c = std::slice::from_raw_parts(center, 5);
        let p = std::slice::from_raw_parts(pixel, 5);
        let c = ClusterCenter {
            l: c[0],
            a: c[1],
            b: c[2],
            x: c[3],
            y: c[4],
        };
        *out = slic::labxy_distance(&c, [p[0], p[1], p[2]], p[3], p[4], m, s);
        Ok(())
    })
}

/// Opaque superpixel label map.
pub struct SubsegLabelMap {
    map: SuperpixelMap,
}

/// SLIC parameters. Zero `max_iters` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SubsegSlicParams {
    pub k: usize,
    pub m: f64,
    pub max_iters: usize,
}

/// Default parameters (K = 256, m = 20, 10 iterations).
#[no_mangle]
pub extern "C" fn subseg_slic_default_params() -> SubsegSlicParams {
    let d = SlicParams::default();
    SubsegSlicParams {
        k: d.k,
        m: d.m,
        max_iters: d.max_iters,
    }
}

/// Segment an interleaved RGB image into superpixels. `mask` may be null;
/// otherwise it holds `width * height` bytes and non-zero marks the object.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes; `out` must be
/// writable. On success `*out` owns a handle for [`subseg_label_map_free`].
#[no_mangle]
pub unsafe extern "C" fn subseg_slic_segment(
    rgb: *const u8,
    width: usize,
    height: usize,
    mask: *const u8,
    params: SubsegSlicParams,
    out: *mut *mut SubsegLabelMap,
) -> SubsegStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let img = read_rgb(rgb, width, height)?;
        let bits: Option<Vec<bool>> = (!mask.is_null()).then(|| {
            std::slice::from_raw_parts(mask, width * height)
                .iter()
                .map(|&b| b != 0)
                .collect()
        });
        let d = SlicParams::default();
        let p = SlicParams {
            k: params.k,
            m: params.m,
            max_iters: if params.max_iters == 0 {
                d.max_iters
            } else {
                params.max_iters
            },
            ..d
        };
        let lab: LabImage = color::srgb_to_lab(&img);
        let seg = check(slic::segment_masked(&lab, bits.as_deref(), &p))?;
        *out = Box::into_raw(Box::new(SubsegLabelMap { map: seg.map }));
        Ok(())
    })
}

/// Number of segments; 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subseg_label_map_num_segments(map: *const SubsegLabelMap) -> usize {
    map.as_ref().map_or(0, |m| m.map.num_segments())
}

/// Width and height; zeros for a null handle.
///
/// # Safety
/// `map` must be null or a live handle; `width`/`height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subseg_label_map_dims(
    map: *const SubsegLabelMap,
    width: *mut usize,
    height: *mut usize,
) {
    let (w, h) = map.as_ref().map_or((0, 0), |m| m.map.dims());
    if let Some(p) = width.as_mut() {
        *p = w;
    }
    if let Some(p) = height.as_mut() {
        *p = h;
    }
}

/// Row-major labels, `width * height` entries; background is `UINT32_MAX`.
/// Borrowed from the handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subseg_label_map_labels(map: *const SubsegLabelMap) -> *const u32 {
    map.as_ref()
        .map_or(ptr::null(), |m| m.map.labels().as_ptr())
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subseg_label_map_free(map: *mut SubsegLabelMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Luminance-threshold object isolation. Writes `width * height` bytes of
/// 0/255 into `mask_out`.
///
/// # Safety
/// `rgb` holds `width * height * 3` bytes, `mask_out` `width * height`.
#[no_mangle]
pub unsafe extern "C" fn subseg_threshold_segment(
    rgb: *const u8,
    width: usize,
    height: usize,
    threshold: f64,
    mask_out: *mut u8,
) -> SubsegStatus {
    guard(|| {
        non_null(mask_out, "mask_out")?;
        let img = read_rgb(rgb, width, height)?;
        let mask = check(isolate::threshold_segment(&img, threshold))?;
        std::slice::from_raw_parts_mut(mask_out, width * height).copy_from_slice(&mask.to_gray());
        Ok(())
    })
}

/// Opaque trained region classifier.
pub struct SubsegModel {
    model: ClassifierModel,
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable. On
/// success `*out` owns a handle for [`subseg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn subseg_model_load(
    path: *const c_char,
    out: *mut *mut SubsegModel,
) -> SubsegStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SubsegStatus::InvalidArgument, "path is not UTF-8"))?;
        let model = check(ClassifierModel::load(path))?;
        *out = Box::into_raw(Box::new(SubsegModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subseg_model_free(model: *mut SubsegModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classify one crop. `is_anomaly` receives 1 or 0, `anomaly_probability`
/// the softmax probability of the anomaly class.
///
/// # Safety
/// `model` must be live; `rgb` holds `width * height * 3` bytes; outputs
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn subseg_model_predict(
    model: *const SubsegModel,
    rgb: *const u8,
    width: usize,
    height: usize,
    is_anomaly: *mut i32,
    anomaly_probability: *mut f64,
) -> SubsegStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(is_anomaly, "is_anomaly")?;
        non_null(anomaly_probability, "anomaly_probability")?;
        let img = read_rgb(rgb, width, height)?;
        let pred = check(classify::predict(
            &(*model).model,
            &classify::featurize_image(&img),
        ))?;
        *is_anomaly = (pred.label == Label::Anomaly) as i32;
        *anomaly_probability = pred.probability;
        Ok(())
    })
}

/// Metrics for confusion counts; rates are fractions in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubsegMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subseg_compute_metrics(
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    out: *mut SubsegMetrics,
) -> SubsegStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = check(eval::compute_metrics(&ConfusionCounts::new(
            tp, fp, tn, fn_,
        )))?;
        *out = SubsegMetrics {
            accuracy: m.accuracy,
            precision: m.precision,
            f1: m.f1,
            tp_rate: m.tp_rate,
            fp_rate: m.fp_rate,
        };
        Ok(())
    })
}
