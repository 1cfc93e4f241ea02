//! Raster-scan block quilting.
//!
//! Blocks of `patch_size` pixels are laid on the canvas left to right, top
//! to bottom, each one stepping `patch_size - overlap` pixels from its
//! neighbour. For every slot the whole source is scanned, positions whose
//! overlap error is within `(1 + tolerance)` of the best are kept, one of
//! them is drawn with a seeded generator, and the block is merged along a
//! minimum-error boundary cut.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{QuiltError, Result};
use crate::raster::{crop, LuminanceMap, RasterImage};
use crate::seam::{apply_seam, build_seam_mask, ErrorSurface, SeamMask};

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_SEED: u64 = 42;

/// Generator behind every random choice: ChaCha with 8 rounds, seeded
/// through `SeedableRng::seed_from_u64`.
pub type QuiltRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> QuiltRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `max(1, round(patch_size / 6))`.
pub fn default_overlap(patch_size: usize) -> usize {
    ((patch_size as f64 / 6.0).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    pub patch_size: usize,
    pub overlap: usize,
    /// Relative slack over the best candidate error.
    pub tolerance: f64,
    /// Weight of the overlap term against the correspondence term.
    pub alpha: f64,
    pub seed: u64,
    pub out_width: usize,
    pub out_height: usize,
}

impl TransferConfig {
    /// Config with the default overlap, tolerance, alpha and seed.
    pub fn new(patch_size: usize, out_width: usize, out_height: usize) -> Self {
        TransferConfig {
            patch_size,
            overlap: default_overlap(patch_size),
            tolerance: DEFAULT_TOLERANCE,
            alpha: DEFAULT_ALPHA,
            seed: DEFAULT_SEED,
            out_width,
            out_height,
        }
    }

    /// Checks on patch size, overlap, tolerance and alpha alone.
    pub fn validate_params(&self) -> Result<()> {
        let p = self.patch_size;
        let bad = |msg: String| Err(QuiltError::InvalidConfig(msg));
        if p < 2 {
            return bad(format!("patch size {p} is below 2"));
        }
        if self.overlap < 1 || self.overlap >= p {
            return bad(format!("overlap {} must be in 1..{p}", self.overlap));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return bad(format!("tolerance {} must be finite and >= 0", self.tolerance));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} must be in [0, 1]", self.alpha));
        }
        Ok(())
    }

    /// Checks that do not depend on the source image.
    pub fn validate(&self) -> Result<()> {
        self.validate_params()?;
        let p = self.patch_size;
        let bad = |msg: String| Err(QuiltError::InvalidConfig(msg));
        if self.out_width < p || self.out_height < p {
            return bad(format!(
                "output {}x{} is smaller than one {p}x{p} block",
                self.out_width, self.out_height
            ));
        }
        Ok(())
    }

    pub fn validate_for(&self, source: &RasterImage) -> Result<()> {
        self.validate()?;
        if source.width() < self.patch_size || source.height() < self.patch_size {
            return Err(QuiltError::SourceTooSmall {
                width: source.width(),
                height: source.height(),
                patch: self.patch_size,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSlot {
    pub row: usize,
    pub col: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPlan {
    pub patch_size: usize,
    pub overlap: usize,
    pub step: usize,
    pub rows: usize,
    pub cols: usize,
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Raster order.
    pub blocks: Vec<BlockSlot>,
}

/// Smallest block grid whose canvas covers the requested output.
pub fn plan_grid(cfg: &TransferConfig) -> Result<GridPlan> {
    cfg.validate()?;
    let p = cfg.patch_size;
    let step = p - cfg.overlap;
    let count = |len: usize| 1 + (len - p).div_ceil(step);
    let (cols, rows) = (count(cfg.out_width), count(cfg.out_height));
    let blocks = (0..rows)
        .flat_map(|row| {
            (0..cols).map(move |col| BlockSlot {
                row,
                col,
                x: col * step,
                y: row * step,
            })
        })
        .collect();
    Ok(GridPlan {
        patch_size: p,
        overlap: cfg.overlap,
        step,
        rows,
        cols,
        canvas_width: p + (cols - 1) * step,
        canvas_height: p + (rows - 1) * step,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapKind {
    None,
    LeftOnly,
    TopOnly,
    LeftAndTop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapSpec {
    pub kind: OverlapKind,
    pub width: usize,
}

impl OverlapSpec {
    pub fn for_slot(row: usize, col: usize, width: usize) -> OverlapSpec {
        let kind = match (row, col) {
            (0, 0) => OverlapKind::None,
            (0, _) => OverlapKind::LeftOnly,
            (_, 0) => OverlapKind::TopOnly,
            _ => OverlapKind::LeftAndTop,
        };
        OverlapSpec { kind, width }
    }

    /// Number of overlap pixels in a `block_size` block; the corner is
    /// counted once.
    pub fn pixel_count(&self, block_size: usize) -> usize {
        let o = self.width;
        match self.kind {
            OverlapKind::None => 0,
            OverlapKind::LeftOnly | OverlapKind::TopOnly => block_size * o,
            OverlapKind::LeftAndTop => 2 * block_size * o - o * o,
        }
    }
}

#[inline]
fn span_ssd(a: &[u8], b: &[u8]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| {
            let d = u as i32 - v as i32;
            (d * d) as u64
        })
        .sum()
}

/// Exact sum of squared RGB differences over the overlap region between
/// the source block at `(sx, sy)` and the canvas at `(ox, oy)`.
#[allow(clippy::too_many_arguments)]
pub fn overlap_error(
    source: &RasterImage,
    sx: usize,
    sy: usize,
    canvas: &RasterImage,
    ox: usize,
    oy: usize,
    spec: OverlapSpec,
    block_size: usize,
) -> Result<u64> {
    let p = block_size;
    if sx + p > source.width() || sy + p > source.height() || ox + p > canvas.width() || oy + p > canvas.height() {
        return Err(QuiltError::OutOfBounds(format!(
            "{p}x{p} block at source ({sx},{sy}) / canvas ({ox},{oy})"
        )));
    }
    if spec.kind != OverlapKind::None && (spec.width == 0 || spec.width >= p) {
        return Err(QuiltError::InvalidConfig(format!(
            "overlap {} does not fit a {p}-pixel block",
            spec.width
        )));
    }
    Ok(overlap_error_unchecked(source, sx, sy, canvas, ox, oy, spec, p))
}

#[allow(clippy::too_many_arguments)]
fn overlap_error_unchecked(
    source: &RasterImage,
    sx: usize,
    sy: usize,
    canvas: &RasterImage,
    ox: usize,
    oy: usize,
    spec: OverlapSpec,
    p: usize,
) -> u64 {
    let o = spec.width;
    let span = |dy: usize, len: usize| span_ssd(source.row_span(sx, sy + dy, len), canvas.row_span(ox, oy + dy, len));
    match spec.kind {
        OverlapKind::None => 0,
        OverlapKind::LeftOnly => (0..p).map(|dy| span(dy, o)).sum(),
        OverlapKind::TopOnly => (0..o).map(|dy| span(dy, p)).sum(),
        OverlapKind::LeftAndTop => (0..o).map(|dy| span(dy, p)).sum::<u64>() + (o..p).map(|dy| span(dy, o)).sum::<u64>(),
    }
}

/// Luminance pair steering block choice towards a content image.
#[derive(Debug, Clone, Copy)]
pub struct Guidance<'a> {
    pub style: &'a LuminanceMap,
    pub content: &'a LuminanceMap,
}

impl Guidance<'_> {
    /// Squared luminance difference between the style window at `(sx, sy)` and
    /// the content window at `(cx, cy)`, clipped to the content bounds.
    /// Returns the sum and the number of pixels summed.
    fn clipped_error(&self, sx: usize, sy: usize, cx: usize, cy: usize, p: usize) -> (f64, usize) {
        let w = p.min(self.content.width().saturating_sub(cx));
        let h = p.min(self.content.height().saturating_sub(cy));
        let (sv, cv) = (self.style.values(), self.content.values());
        let (sw, cw) = (self.style.width(), self.content.width());
        let mut sum = 0.0;
        for dy in 0..h {
            let s = &sv[(sy + dy) * sw + sx..][..w];
            let c = &cv[(cy + dy) * cw + cx..][..w];
            sum += s.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        (sum, w * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub x: usize,
    pub y: usize,
    pub error: f64,
}

/// Source positions whose error is within tolerance of the best one,
/// ordered by `(y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    min_error: f64,
    entries: Vec<Candidate>,
}

impl CandidateSet {
    /// Keep every scored position with `error <= (1 + tolerance) * min`.
    pub fn from_scores(scores: Vec<Candidate>, tolerance: f64) -> Option<CandidateSet> {
        let min_error = scores.iter().map(|c| c.error).reduce(f64::min)?;
        let limit = (1.0 + tolerance) * min_error;
        let entries = scores.into_iter().filter(|c| c.error <= limit).collect();
        Some(CandidateSet { min_error, entries })
    }

    pub fn min_error(&self) -> f64 {
        self.min_error
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|c| (c.x, c.y)).collect()
    }
}

/// Score every valid block position in `source` against the canvas slot at
/// `(ox, oy)` and keep those within tolerance.
///
/// Without guidance the score is the raw overlap SSD. With guidance it is
/// the per-pixel normalised blend `alpha * overlap + (1 - alpha) * corr`,
/// scaled by the overlap's pixel-channel count so that `alpha = 1` yields the
/// raw SSD exactly. A slot with no overlap scores `(1 - alpha) * corr`.
pub fn find_candidates(
    source: &RasterImage,
    canvas: &RasterImage,
    ox: usize,
    oy: usize,
    spec: OverlapSpec,
    cfg: &TransferConfig,
    guidance: Option<Guidance<'_>>,
) -> Result<CandidateSet> {
    let p = cfg.patch_size;
    if source.width() < p || source.height() < p {
        return Err(QuiltError::SourceTooSmall {
            width: source.width(),
            height: source.height(),
            patch: p,
        });
    }
    if ox + p > canvas.width() || oy + p > canvas.height() {
        return Err(QuiltError::OutOfBounds(format!(
            "{p}x{p} slot at ({ox},{oy}) leaves the {}x{} canvas",
            canvas.width(),
            canvas.height()
        )));
    }
    if let Some(g) = guidance {
        if g.style.width() != source.width() || g.style.height() != source.height() {
            return Err(QuiltError::DimensionMismatch(
                "style luminance does not match the source image".into(),
            ));
        }
        if ox >= g.content.width() || oy >= g.content.height() {
            return Err(QuiltError::OutOfBounds(format!(
                "slot ({ox},{oy}) starts outside the content image"
            )));
        }
    }
    if spec.kind != OverlapKind::None && (spec.width == 0 || spec.width >= p) {
        return Err(QuiltError::InvalidConfig(format!(
            "overlap {} does not fit a {p}-pixel block",
            spec.width
        )));
    }

    let alpha = cfg.alpha;
    let overlap_channels = (spec.pixel_count(p) * 3) as f64;
    let score = |sx: usize, sy: usize| -> f64 {
        let overlap = overlap_error_unchecked(source, sx, sy, canvas, ox, oy, spec, p) as f64;
        match guidance {
            None => overlap,
            Some(g) => {
                let (corr, n) = g.clipped_error(sx, sy, ox, oy, p);
                let corr = corr / n as f64;
                if spec.kind == OverlapKind::None {
                    (1.0 - alpha) * corr
                } else {
                    alpha * overlap + (1.0 - alpha) * corr * overlap_channels
                }
            }
        }
    };

    let (nx, ny) = (source.width() - p + 1, source.height() - p + 1);
    let scores: Vec<Candidate> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|sy| (0..nx).map(move |sx| (sx, sy)))
        .map(|(sx, sy)| Candidate {
            x: sx,
            y: sy,
            error: score(sx, sy),
        })
        .collect();
    Ok(CandidateSet::from_scores(scores, cfg.tolerance).expect("at least one valid position"))
}

/// Uniform draw from the candidate list.
pub fn select_block(cands: &CandidateSet, rng: &mut QuiltRng) -> (usize, usize) {
    let c = cands.entries[rng.random_range(0..cands.entries.len())];
    (c.x, c.y)
}

/// Everything known about one placed block, handed to a [`PlacementObserver`].
#[derive(Debug)]
pub struct Placement<'a> {
    pub index: usize,
    pub slot: BlockSlot,
    pub overlap: OverlapSpec,
    pub candidates: &'a CandidateSet,
    pub chosen: (usize, usize),
    pub left_surface: Option<&'a ErrorSurface>,
    pub top_surface: Option<&'a ErrorSurface>,
    pub mask: &'a SeamMask,
}

pub trait PlacementObserver {
    fn on_placement(&mut self, placement: &Placement<'_>);
}

impl<F: FnMut(&Placement<'_>)> PlacementObserver for F {
    fn on_placement(&mut self, placement: &Placement<'_>) {
        self(placement)
    }
}

/// The placement loop shared by synthesis and transfer.
pub(crate) fn quilt(
    source: &RasterImage,
    cfg: &TransferConfig,
    guidance: Option<Guidance<'_>>,
    observer: &mut dyn PlacementObserver,
) -> Result<RasterImage> {
    cfg.validate_for(source)?;
    let plan = plan_grid(cfg)?;
    let (p, o) = (plan.patch_size, plan.overlap);
    let mut canvas = RasterImage::filled(plan.canvas_width, plan.canvas_height, [0, 0, 0])?;
    let mut rng = seeded_rng(cfg.seed);

    for (index, &slot) in plan.blocks.iter().enumerate() {
        let spec = OverlapSpec::for_slot(slot.row, slot.col, o);
        let candidates = find_candidates(source, &canvas, slot.x, slot.y, spec, cfg, guidance)?;
        let (sx, sy) = select_block(&candidates, &mut rng);

        let left = matches!(spec.kind, OverlapKind::LeftOnly | OverlapKind::LeftAndTop)
            .then(|| ErrorSurface::between(source, sx, sy, &canvas, slot.x, slot.y, (0, 0), (o, p)))
            .transpose()?;
        let top = matches!(spec.kind, OverlapKind::TopOnly | OverlapKind::LeftAndTop)
            .then(|| ErrorSurface::between(source, sx, sy, &canvas, slot.x, slot.y, (0, 0), (p, o)))
            .transpose()?;
        let mask = build_seam_mask(spec, p, left.as_ref(), top.as_ref())?;
        apply_seam(&mut canvas, source, sx, sy, slot.x, slot.y, &mask)?;

        observer.on_placement(&Placement {
            index,
            slot,
            overlap: spec,
            candidates: &candidates,
            chosen: (sx, sy),
            left_surface: left.as_ref(),
            top_surface: top.as_ref(),
            mask: &mask,
        });
    }

    crop(&canvas, 0, 0, cfg.out_width, cfg.out_height)
}

/// Texture synthesis: grow `source` into a `cfg.out_width`x`cfg.out_height` image.
pub fn synthesize(source: &RasterImage, cfg: &TransferConfig) -> Result<RasterImage> {
    quilt(source, cfg, None, &mut |_: &Placement<'_>| {})
}

pub fn synthesize_observed(
    source: &RasterImage,
    cfg: &TransferConfig,
    observer: &mut dyn PlacementObserver,
) -> Result<RasterImage> {
    quilt(source, cfg, None, observer)
}
