//! Independent reference computations for the integration tests.
//!
//! Everything here is written as plain loops over pixels and never calls
//! into the library's scoring or DP code, so it can be used to check it.
#![allow(dead_code)]

use std::collections::HashMap;

use quilt_core::raster::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> RasterImage {
    RasterImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
}

/// Random image drawn from a small palette, so candidate ties actually occur.
pub fn random_palette_image(rng: &mut impl Rng, w: usize, h: usize, colors: usize) -> RasterImage {
    let palette: Vec<[u8; 3]> = (0..colors).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    RasterImage::from_fn(w, h, |_, _| palette[rng.random_range(0..colors)]).unwrap()
}

/// Smooth-ish structured image: stripes and blobs, so gradients exceed the
/// structure threshold.
pub fn structured_image(rng: &mut impl Rng, w: usize, h: usize) -> RasterImage {
    let fx: f64 = rng.random_range(0.05..0.4);
    let fy: f64 = rng.random_range(0.05..0.4);
    let phase: f64 = rng.random_range(0.0..6.0);
    let base: [u8; 3] = [rng.random(), rng.random(), rng.random()];
    RasterImage::from_fn(w, h, |x, y| {
        let s = ((x as f64 * fx + phase).sin() + (y as f64 * fy).cos()) * 0.5;
        let v = ((s + 1.0) * 127.0) as u8;
        [v ^ base[0] & 0x3f, v, 255 - v / 2 ^ base[2] & 0x1f]
    })
    .unwrap()
}

// ---------------------------------------------------------------------------
// Seams
// ---------------------------------------------------------------------------

/// Minimum total cost over every 8-connected top-to-bottom path, by
/// enumerating all of them.
pub fn brute_force_seam_cost(rows: usize, cols: usize, values: &[f64]) -> f64 {
    fn walk(r: usize, c: usize, acc: f64, rows: usize, cols: usize, v: &[f64], best: &mut f64) {
        let acc = acc + v[r * cols + c];
        if r + 1 == rows {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for dc in [-1i64, 0, 1] {
            let nc = c as i64 + dc;
            if nc >= 0 && (nc as usize) < cols {
                walk(r + 1, nc as usize, acc, rows, cols, v, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    for c in 0..cols {
        walk(0, c, 0.0, rows, cols, values, &mut best);
    }
    best
}

pub fn transpose(rows: usize, cols: usize, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = values[r * cols + c];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Overlap scoring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    None,
    Left,
    Top,
    Corner,
}

/// Is block-local pixel `(dx, dy)` inside the overlap?
pub fn in_overlap(region: Region, o: usize, dx: usize, dy: usize) -> bool {
    match region {
        Region::None => false,
        Region::Left => dx < o,
        Region::Top => dy < o,
        Region::Corner => dx < o || dy < o,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn brute_overlap_ssd(
    source: &RasterImage,
    sx: usize,
    sy: usize,
    canvas: &RasterImage,
    ox: usize,
    oy: usize,
    region: Region,
    o: usize,
    p: usize,
) -> u64 {
    let mut total = 0u64;
    for dy in 0..p {
        for dx in 0..p {
            if !in_overlap(region, o, dx, dy) {
                continue;
            }
            let a = source.pixel(sx + dx, sy + dy);
            let b = canvas.pixel(ox + dx, oy + dy);
            for ch in 0..3 {
                let d = a[ch] as i64 - b[ch] as i64;
                total += (d * d) as u64;
            }
        }
    }
    total
}

/// Exhaustive tolerance filter: every position whose SSD is within
/// `(1 + eps)` of the global minimum, in `(y, x)` order.
pub fn brute_candidates(
    source: &RasterImage,
    canvas: &RasterImage,
    ox: usize,
    oy: usize,
    region: Region,
    o: usize,
    p: usize,
    eps: f64,
) -> (u64, Vec<(usize, usize)>) {
    let mut all = Vec::new();
    for sy in 0..=source.height() - p {
        for sx in 0..=source.width() - p {
            all.push(((sx, sy), brute_overlap_ssd(source, sx, sy, canvas, ox, oy, region, o, p)));
        }
    }
    let min = all.iter().map(|(_, e)| *e).min().unwrap();
    let keep = all
        .into_iter()
        .filter(|(_, e)| *e as f64 <= (1.0 + eps) * min as f64)
        .map(|(pos, _)| pos)
        .collect();
    (min, keep)
}

pub fn luma(px: [u8; 3]) -> f64 {
    (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0
}

pub fn brute_correspondence(style: &RasterImage, sx: usize, sy: usize, content: &RasterImage, cx: usize, cy: usize, p: usize) -> f64 {
    let mut sum = 0.0;
    for dy in 0..p {
        for dx in 0..p {
            let d = luma(style.pixel(sx + dx, sy + dy)) - luma(content.pixel(cx + dx, cy + dy));
            sum += d * d;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

pub fn oracle_histogram_distance(a: &RasterImage, b: &RasterImage) -> f64 {
    fn hist(img: &RasterImage) -> HashMap<(u8, u8, u8), f64> {
        let mut h = HashMap::new();
        let n = (img.width() * img.height()) as f64;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let [r, g, b] = img.pixel(x, y);
                *h.entry((r / 32, g / 32, b / 32)).or_insert(0.0) += 1.0 / n;
            }
        }
        h
    }
    let (ha, hb) = (hist(a), hist(b));
    let mut keys: Vec<_> = ha.keys().chain(hb.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    let mut d = 0.0;
    for k in keys {
        let x = ha.get(&k).copied().unwrap_or(0.0);
        let y = hb.get(&k).copied().unwrap_or(0.0);
        if x + y > 0.0 {
            d += (x - y).powi(2) / (x + y);
        }
    }
    0.5 * d
}

pub fn oracle_structure_score(a: &RasterImage, b: &RasterImage, tau: f64) -> f64 {
    let lum = |img: &RasterImage, x: usize, y: usize| luma(img.pixel(x, y));
    let grad = |img: &RasterImage, x: usize, y: usize| {
        (
            0.5 * (lum(img, x + 1, y) - lum(img, x - 1, y)),
            0.5 * (lum(img, x, y + 1) - lum(img, x, y - 1)),
        )
    };
    let mut total = 0.0;
    let mut n = 0;
    for y in 1..a.height() - 1 {
        for x in 1..a.width() - 1 {
            let (g1, g2) = (grad(a, x, y), grad(b, x, y));
            let m1 = (g1.0 * g1.0 + g1.1 * g1.1).sqrt();
            let m2 = (g2.0 * g2.0 + g2.1 * g2.1).sqrt();
            if m1 > tau && m2 > tau {
                total += ((g1.0 * g2.0 + g1.1 * g2.1) / (m1 * m2)).abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}
