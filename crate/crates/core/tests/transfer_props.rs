mod common;

use std::collections::HashSet;

use quilt_core::quilting::{overlap_error, synthesize_observed, Placement, TransferConfig};
use quilt_core::raster::{to_luminance, RasterImage};
use quilt_core::transfer::{correspondence_error, transfer, transfer_observed, TransferJob};
use rand::Rng;

fn record_sets(run: impl FnOnce(&mut dyn FnMut(&Placement<'_>))) -> Vec<Vec<(usize, usize, f64)>> {
    let mut sets = Vec::new();
    run(&mut |pl: &Placement<'_>| {
        sets.push(pl.candidates.entries().iter().map(|c| (c.x, c.y, c.error)).collect());
    });
    sets
}

#[test]
fn correspondence_matches_double_loop() {
    let mut rng = common::rng(21);
    for _ in 0..30 {
        let style = common::random_image(&mut rng, 20, 20);
        let content = common::random_image(&mut rng, 20, 20);
        let p = rng.random_range(1..=9);
        let (sx, sy, cx, cy) = (
            rng.random_range(0..=20 - p),
            rng.random_range(0..=20 - p),
            rng.random_range(0..=20 - p),
            rng.random_range(0..=20 - p),
        );
        let got = correspondence_error(&to_luminance(&style), sx, sy, &to_luminance(&content), cx, cy, p).unwrap();
        let want = common::brute_correspondence(&style, sx, sy, &content, cx, cy, p);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn alpha_one_reproduces_synthesis_candidates() {
    let mut rng = common::rng(31);
    for seed in 0..5 {
        let style = common::random_palette_image(&mut rng, 24, 24, 5);
        let content = common::random_image(&mut rng, 30, 26);
        let cfg = TransferConfig {
            alpha: 1.0,
            seed,
            ..TransferConfig::new(6, content.width(), content.height())
        };
        let job = TransferJob::new(content, style.clone(), cfg);
        let synth = record_sets(|obs| {
            synthesize_observed(&style, &job.cfg, &mut |pl: &Placement<'_>| obs(pl)).unwrap();
        });
        let guided = record_sets(|obs| {
            transfer_observed(&job, &mut |pl: &Placement<'_>| obs(pl)).unwrap();
        });
        assert_eq!(synth, guided, "seed {seed}");
    }
}

#[test]
fn self_transfer_reconstructs_content() {
    // 41 = 5 + 9 * 4, so the canvas is exactly the content and every slot
    // has an in-place source window.
    let mut rng = common::rng(41);
    let img = common::random_image(&mut rng, 41, 41);
    let cfg = TransferConfig {
        alpha: 0.0,
        tolerance: 0.0,
        overlap: 1,
        ..TransferConfig::new(5, 41, 41)
    };
    let job = TransferJob::new(img.clone(), img.clone(), cfg);
    let mut unique = true;
    let out = transfer_observed(&job, &mut |pl: &Placement<'_>| {
        assert_eq!(pl.candidates.min_error(), 0.0);
        assert!(pl.candidates.positions().contains(&(pl.slot.x, pl.slot.y)));
        unique &= pl.candidates.len() == 1;
    })
    .unwrap();
    assert!(unique, "random content should give one zero-error window per slot");
    assert_eq!(out, img);
}

#[test]
fn blended_error_uses_exact_overlap_term() {
    // Rebuild the canvas block by block and check each candidate's blended
    // error against separately computed overlap and correspondence terms.
    let mut rng = common::rng(52);
    let style = common::random_image(&mut rng, 12, 12);
    let content = common::random_image(&mut rng, 13, 13);
    let (style_lum, content_lum) = (to_luminance(&style), to_luminance(&content));
    let alpha = 0.6;
    let cfg = TransferConfig {
        alpha,
        tolerance: 1e9,
        overlap: 1,
        ..TransferConfig::new(5, 13, 13)
    };
    let job = TransferJob::new(content.clone(), style.clone(), cfg);
    let mut canvas = RasterImage::filled(13, 13, [0, 0, 0]).unwrap();
    let mut checked = 0;
    transfer_observed(&job, &mut |pl: &Placement<'_>| {
        if pl.overlap.kind != quilt_core::quilting::OverlapKind::None {
            let n_overlap = (pl.overlap.pixel_count(5) * 3) as f64;
            for c in pl.candidates.entries() {
                let ov = overlap_error(&style, c.x, c.y, &canvas, pl.slot.x, pl.slot.y, pl.overlap, 5).unwrap() as f64 / n_overlap;
                let corr = correspondence_error(&style_lum, c.x, c.y, &content_lum, pl.slot.x, pl.slot.y, 5).unwrap() / 25.0;
                let want = alpha * ov + (1.0 - alpha) * corr;
                let got = c.error / n_overlap;
                assert!((got - want).abs() < 1e-9, "{got} vs {want}");
                assert!(got >= ov.min(corr) - 1e-12 && got <= ov.max(corr) + 1e-12);
                checked += 1;
            }
        }
        for r in 0..5 {
            for cc in 0..5 {
                if pl.mask.take_new(r, cc) {
                    let px = style.pixel(pl.chosen.0 + cc, pl.chosen.1 + r);
                    canvas = set(&canvas, pl.slot.x + cc, pl.slot.y + r, px);
                }
            }
        }
    })
    .unwrap();
    assert!(checked > 0);
}

fn set(img: &RasterImage, x: usize, y: usize, px: [u8; 3]) -> RasterImage {
    let mut bytes = img.pixels().to_vec();
    let i = (y * img.width() + x) * 3;
    bytes[i..i + 3].copy_from_slice(&px);
    RasterImage::new(img.width(), img.height(), bytes).unwrap()
}

#[test]
fn transfer_is_deterministic_and_sourced_from_style() {
    let mut rng = common::rng(61);
    let style = common::random_image(&mut rng, 32, 32);
    let content = common::structured_image(&mut rng, 45, 38);
    let job = TransferJob::new(content, style.clone(), TransferConfig::new(8, 1, 1));
    let a = transfer(&job).unwrap();
    let b = transfer(&job).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.width(), a.height()), (45, 38));
    let palette: HashSet<[u8; 3]> = (0..32).flat_map(|y| (0..32).map(move |x| (x, y))).map(|(x, y)| style.pixel(x, y)).collect();
    assert!(a.pixels().chunks_exact(3).all(|p| palette.contains(&[p[0], p[1], p[2]])));
}
