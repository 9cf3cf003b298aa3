use std::ffi::{CStr, CString};
use std::ptr;

use subseg_ffi::*;

fn last_error() -> String {
    let p = subseg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn lab_of_white_and_red() {
    let mut lab = [0.0; 3];
    unsafe {
        assert_eq!(
            subseg_srgb_to_lab([255, 255, 255].as_ptr(), lab.as_mut_ptr()),
            SubsegStatus::Ok
        );
        assert!((lab[0] - 100.0).abs() < 1e-9 && lab[1].abs() < 1e-9 && lab[2].abs() < 1e-9);
        assert_eq!(
            subseg_srgb_to_lab([255, 0, 0].as_ptr(), lab.as_mut_ptr()),
            SubsegStatus::Ok
        );
    }
    assert!(
        (lab[0] - 53.24).abs() < 0.1
            && (lab[1] - 80.09).abs() < 0.1
            && (lab[2] - 67.20).abs() < 0.1
    );
    assert!(subseg_last_error().is_null());
}

#[test]
fn labxy_three_four_five() {
    let c = [50.0, 0.0, 0.0, 0.0, 0.0];
    let p = [50.0, 0.0, 0.0, 3.0, 4.0];
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            subseg_labxy_distance(c.as_ptr(), p.as_ptr(), 20.0, 10.0, &mut d),
            SubsegStatus::Ok
        );
        assert!((d - 10.0).abs() < 1e-12);
        assert_eq!(
            subseg_labxy_distance(c.as_ptr(), p.as_ptr(), 20.0, 0.0, &mut d),
            SubsegStatus::InvalidArgument
        );
    }
}

#[test]
fn segment_constant_image_into_quadrants() {
    let rgb = vec![120u8; 16 * 16 * 3];
    let params = SubsegSlicParams {
        k: 4,
        ..subseg_slic_default_params()
    };
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(
            subseg_slic_segment(rgb.as_ptr(), 16, 16, ptr::null(), params, &mut map),
            SubsegStatus::Ok
        );
        assert_eq!(subseg_label_map_num_segments(map), 4);
        let (mut w, mut h) = (0, 0);
        subseg_label_map_dims(map, &mut w, &mut h);
        assert_eq!((w, h), (16, 16));
        let labels = std::slice::from_raw_parts(subseg_label_map_labels(map), w * h);
        assert_eq!(labels[0], labels[7 * 16 + 7]);
        assert_ne!(labels[0], labels[15]);
        subseg_label_map_free(map);
        subseg_label_map_free(ptr::null_mut());
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut map = ptr::null_mut();
    let params = SubsegSlicParams {
        k: 0,
        ..subseg_slic_default_params()
    };
    let rgb = [0u8; 12];
    unsafe {
        assert_eq!(
            subseg_slic_segment(rgb.as_ptr(), 2, 2, ptr::null(), params, &mut map),
            SubsegStatus::InvalidArgument
        );
        assert!(map.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            subseg_srgb_to_lab(ptr::null(), ptr::null_mut()),
            SubsegStatus::NullPointer
        );

        let white = [255u8; 4 * 4 * 3];
        let mut mask = [0u8; 16];
        assert_eq!(
            subseg_threshold_segment(white.as_ptr(), 4, 4, 30.0, mask.as_mut_ptr()),
            SubsegStatus::DataError
        );
        assert_eq!(last_error(), "no foreground");

        let mut model = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.bin").unwrap();
        assert_eq!(
            subseg_model_load(missing.as_ptr(), &mut model),
            SubsegStatus::IoError
        );
        assert!(model.is_null());
    }
}

#[test]
fn metrics_fixture() {
    let mut m = SubsegMetrics::default();
    unsafe {
        assert_eq!(subseg_compute_metrics(9, 1, 9, 1, &mut m), SubsegStatus::Ok);
        assert_eq!(
            subseg_compute_metrics(0, 0, 0, 0, &mut m),
            SubsegStatus::DataError
        );
    }
    assert!((m.accuracy - 0.9).abs() < 1e-12 && (m.fp_rate - 0.1).abs() < 1e-12);
}

#[test]
fn model_round_trip_through_file() {
    use subseg::classify::{train, FeatureVector, TrainConfig};
    use subseg::Label;
    let examples: Vec<_> = (0..40)
        .map(|i| {
            let label = if i % 2 == 0 {
                Label::Benign
            } else {
                Label::Anomaly
            };
            let v = if label == Label::Anomaly { 1.0 } else { -1.0 };
            (
                FeatureVector::new(vec![v + i as f64 * 1e-3; subseg::classify::FEATURE_LEN]),
                label,
            )
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let trained = train(&examples, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    trained.model.save(&path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    let crop = vec![200u8; 190 * 150 * 3];
    let (mut flag, mut p) = (-1, -1.0);
    unsafe {
        assert_eq!(
            subseg_model_load(cpath.as_ptr(), &mut model),
            SubsegStatus::Ok
        );
        assert_eq!(
            subseg_model_predict(model, crop.as_ptr(), 190, 150, &mut flag, &mut p),
            SubsegStatus::Ok
        );
        subseg_model_free(model);
    }
    assert!(flag == 0 || flag == 1);
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(flag == 1, p > 0.5);
}
