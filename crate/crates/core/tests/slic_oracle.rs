mod common;

use common::*;
use rand::Rng;
use subseg::color::{srgb_to_lab, LabImage, RgbImage};
use subseg::slic::{self, SlicParams, BACKGROUND};

#[test]
fn windowed_assignment_matches_brute_force() {
    let mut r = rng(1);
    for seed in 0..20 {
        let img = random_lab(16, 16, seed);
        let params = SlicParams {
            k: r.random_range(2..=24),
            m: pick(&mut r, &[1.0, 10.0, 20.0, 40.0]),
            ..SlicParams::default()
        };
        let (centers, s) = slic::init_centers_masked(&img, None, &params).unwrap();
        let got = slic::assign(&img, None, &centers, params.m, s);
        let want = brute_force_assign(&img, None, &centers, params.m, s);
        assert_eq!(got.labels, want, "seed {seed} k {}", params.k);
    }
}

#[test]
fn masked_assignment_matches_brute_force() {
    for seed in 0..10 {
        let img = random_lab(16, 16, 100 + seed);
        let mask: Vec<bool> = (0..256).map(|p| (p % 16) >= 3 && (p / 16) < 13).collect();
        let params = SlicParams::with_k(6);
        let (centers, s) = slic::init_centers_masked(&img, Some(&mask), &params).unwrap();
        let got = slic::assign(&img, Some(&mask), &centers, params.m, s);
        assert_eq!(
            got.labels,
            brute_force_assign(&img, Some(&mask), &centers, params.m, s)
        );
    }
}

#[test]
fn full_segmentation_covers_and_connects() {
    let mut r = rng(2);
    for seed in 0..20 {
        let img = random_lab(128, 128, 1000 + seed);
        let params = SlicParams::with_k(r.random_range(16..=400));
        let seg = slic::segment(&img, &params).unwrap();
        let map = &seg.map;
        let n = map.num_segments();
        assert!(map.labels().iter().all(|&l| (l as usize) < n));
        assert!(map.segment_sizes().iter().all(|&c| c > 0));
        assert!(labels_connected(128, 128, map.labels()), "seed {seed}");
    }
}

#[test]
fn residual_finite_and_not_growing() {
    for seed in 0..20 {
        let img = random_lab(48, 40, 2000 + seed);
        let seg = slic::segment(&img, &SlicParams::with_k(20)).unwrap();
        let hist = &seg.residual_history;
        assert!(!hist.is_empty() && hist.iter().all(|r| r.is_finite()));
        assert!(
            hist.last().unwrap() <= hist.first().unwrap(),
            "seed {seed}: {hist:?}"
        );
    }
}

#[test]
fn halves_fixture_segments_exactly() {
    let data: Vec<[f64; 3]> = (0..64)
        .map(|p| [if p % 8 < 4 { 0.0 } else { 80.0 }, 0.0, 0.0])
        .collect();
    let img = LabImage::new(8, 8, data).unwrap();
    let seg = slic::segment(&img, &SlicParams::with_k(2)).unwrap();
    assert_eq!(seg.map.num_segments(), 2);
    for p in 0..64 {
        assert_eq!(seg.map.labels()[p], (p % 8 >= 4) as u32);
    }
}

/// Shape of the clustering itself: orphan merging would otherwise dominate
/// at small m, where nearly every cluster is fragmented.
#[test]
fn compactness_grows_with_m() {
    for (seed, amp) in [(0u64, 10u8), (1, 30), (2, 60), (3, 127)] {
        let mut r = rng(seed);
        let data = (0..96 * 96 * 3)
            .map(|_| (128 + r.random_range(0..=2 * amp as i32) - amp as i32) as u8)
            .collect();
        let img = srgb_to_lab(&RgbImage::new(96, 96, data).unwrap());
        let ratios: Vec<f64> = [1.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&m| {
                let params = SlicParams {
                    m,
                    enforce_connectivity: false,
                    ..SlicParams::with_k(36)
                };
                let map = slic::segment(&img, &params).unwrap().map;
                mean_shape_ratio(96, 96, map.labels(), map.num_segments())
            })
            .collect();
        for pair in ratios.windows(2) {
            assert!(pair[1] <= pair[0], "amplitude {amp}: {ratios:?}");
        }
    }
}

#[test]
fn deterministic() {
    let img = random_lab(64, 48, 5);
    let a = slic::segment(&img, &SlicParams::with_k(30)).unwrap();
    let b = slic::segment(&img, &SlicParams::with_k(30)).unwrap();
    assert_eq!(a.map, b.map);
    assert_eq!(a.residual_history, b.residual_history);
}

#[test]
fn masked_background_stays_background() {
    let rgb = random_rgb(40, 30, 9);
    let img = srgb_to_lab(&rgb);
    let mask: Vec<bool> = (0..1200)
        .map(|p| {
            let (x, y) = (p % 40, p / 40);
            (8..32).contains(&x) && (5..25).contains(&y)
        })
        .collect();
    let seg = slic::segment_masked(&img, Some(&mask), &SlicParams::with_k(12)).unwrap();
    for (p, &l) in seg.map.labels().iter().enumerate() {
        assert_eq!(l == BACKGROUND, !mask[p]);
    }
    assert!(labels_connected(40, 30, seg.map.labels()));
}
