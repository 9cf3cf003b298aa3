#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subseg::color::{srgb_to_lab, LabImage, RgbImage};
use subseg::slic::{ClusterCenter, BACKGROUND, UNASSIGNED};

pub fn random_rgb(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * 3).map(|_| rng.random()).collect();
    RgbImage::new(w, h, data).unwrap()
}

pub fn random_lab(w: usize, h: usize, seed: u64) -> LabImage {
    srgb_to_lab(&random_rgb(w, h, seed))
}

/// Naive assignment: every pixel scans every center, keeping those whose
/// window (pixel centre within `s` on both axes) contains it; strict
/// improvement so the lowest index wins ties.
pub fn brute_force_assign(
    img: &LabImage,
    mask: Option<&[bool]>,
    centers: &[ClusterCenter],
    m: f64,
    s: f64,
) -> Vec<u32> {
    let w = img.width();
    let mut out = Vec::with_capacity(img.len());
    for (p, lab) in img.pixels().iter().enumerate() {
        if mask.is_some_and(|mk| !mk[p]) {
            out.push(BACKGROUND);
            continue;
        }
        let (px, py) = ((p % w) as f64 + 0.5, (p / w) as f64 + 0.5);
        let mut best = (f64::INFINITY, UNASSIGNED);
        for (k, c) in centers.iter().enumerate() {
            if (px - c.x).abs() > s || (py - c.y).abs() > s {
                continue;
            }
            let dl = ((c.l - lab[0]) * (c.l - lab[0])
                + (c.a - lab[1]) * (c.a - lab[1])
                + (c.b - lab[2]) * (c.b - lab[2]))
                .sqrt();
            let dxy = ((c.x - px) * (c.x - px) + (c.y - py) * (c.y - py)).sqrt();
            let d = dl + m / s * dxy;
            if d < best.0 {
                best = (d, k as u32);
            }
        }
        out.push(best.1);
    }
    out
}

/// Independent 4-connectivity check by flood fill per label.
pub fn labels_connected(w: usize, h: usize, labels: &[u32]) -> bool {
    let mut seen_label = std::collections::HashSet::new();
    let mut visited = vec![false; labels.len()];
    for start in 0..labels.len() {
        if visited[start] || labels[start] == BACKGROUND {
            continue;
        }
        if !seen_label.insert(labels[start]) {
            return false;
        }
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut nb = Vec::new();
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            for q in nb {
                if !visited[q] && labels[q] == labels[p] {
                    visited[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    true
}

/// Mean over segments of perimeter² / area, perimeter counted as the number
/// of 4-neighbour edges leaving the segment (image border included).
pub fn mean_shape_ratio(w: usize, h: usize, labels: &[u32], n: usize) -> f64 {
    let mut area = vec![0usize; n];
    let mut perim = vec![0usize; n];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x] as usize;
            area[l] += 1;
            let nbs = [
                (x > 0).then(|| labels[y * w + x - 1]),
                (x + 1 < w).then(|| labels[y * w + x + 1]),
                (y > 0).then(|| labels[(y - 1) * w + x]),
                (y + 1 < h).then(|| labels[(y + 1) * w + x]),
            ];
            perim[l] += nbs.iter().filter(|o| **o != Some(l as u32)).count();
        }
    }
    area.iter()
        .zip(&perim)
        .map(|(&a, &p)| (p * p) as f64 / a as f64)
        .sum::<f64>()
        / n as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pick<T: Copy>(r: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[r.random_range(0..xs.len())]
}
