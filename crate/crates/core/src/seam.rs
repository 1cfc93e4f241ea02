//! Minimum-error boundary cuts through block overlaps.
//!
//! A seam is an 8-connected monotone path through a per-pixel error surface.
//! Pixels on the near side of the seam keep the existing canvas value, the
//! seam itself and everything beyond it come from the new block. Merging is a
//! hard cut: no blending, so every merged pixel is a byte copy of one of its
//! two inputs.

use crate::error::{QuiltError, Result};
use crate::quilting::{OverlapKind, OverlapSpec};
use crate::raster::RasterImage;

/// Non-negative per-pixel costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ErrorSurface {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(QuiltError::EmptySurface);
        }
        if values.len() != rows * cols {
            return Err(QuiltError::DimensionMismatch(format!(
                "{rows}x{cols} surface needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(QuiltError::InvalidConfig(
                "error surface values must be finite and non-negative".into(),
            ));
        }
        Ok(ErrorSurface { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn transpose(&self) -> ErrorSurface {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                values.push(self.get(r, c));
            }
        }
        ErrorSurface {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }

    /// Squared RGB difference between the source block at `(sx, sy)` and the
    /// canvas block at `(ox, oy)`, over the `w`x`h` rectangle at block-local
    /// offset `(dx, dy)`.
    #[allow(clippy::too_many_arguments)]
    pub fn between(
        source: &RasterImage,
        sx: usize,
        sy: usize,
        canvas: &RasterImage,
        ox: usize,
        oy: usize,
        (dx, dy): (usize, usize),
        (w, h): (usize, usize),
    ) -> Result<ErrorSurface> {
        if sx + dx + w > source.width()
            || sy + dy + h > source.height()
            || ox + dx + w > canvas.width()
            || oy + dy + h > canvas.height()
        {
            return Err(QuiltError::OutOfBounds(format!(
                "{w}x{h} surface at block offset ({dx},{dy}) leaves the source or canvas"
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for r in 0..h {
            let a = source.row_span(sx + dx, sy + dy + r, w);
            let b = canvas.row_span(ox + dx, oy + dy + r, w);
            for (pa, pb) in a.chunks_exact(3).zip(b.chunks_exact(3)) {
                let d: i32 = pa
                    .iter()
                    .zip(pb)
                    .map(|(&u, &v)| (u as i32 - v as i32).pow(2))
                    .sum();
                values.push(d as f64);
            }
        }
        ErrorSurface::new(h, w, values)
    }
}

/// One index per step along the seam: a column per row for vertical seams,
/// a row per column for horizontal ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeamPath(pub Vec<usize>);

impl SeamPath {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Top-to-bottom cut minimising the summed surface cost.
///
/// Ties go to the smallest column at every decision, both when picking the
/// end of the path and while tracing predecessors.
pub fn min_cost_vertical_seam(surface: &ErrorSurface) -> Result<(SeamPath, f64)> {
    let (rows, cols) = (surface.rows, surface.cols);
    if rows == 0 || cols == 0 {
        return Err(QuiltError::EmptySurface);
    }

    let mut cumulative = surface.values.clone();
    for r in 1..rows {
        for c in 0..cols {
            let best = best_predecessor(&cumulative[(r - 1) * cols..r * cols], c);
            cumulative[r * cols + c] += cumulative[(r - 1) * cols + best];
        }
    }

    let last = &cumulative[(rows - 1) * cols..];
    let mut col = argmin_first(last, 0, cols);
    let cost = last[col];

    let mut path = vec![0; rows];
    path[rows - 1] = col;
    for r in (0..rows - 1).rev() {
        col = best_predecessor(&cumulative[r * cols..(r + 1) * cols], col);
        path[r] = col;
    }
    Ok((SeamPath(path), cost))
}

/// Left-to-right cut; the path holds one row index per column.
pub fn min_cost_horizontal_seam(surface: &ErrorSurface) -> Result<(SeamPath, f64)> {
    min_cost_vertical_seam(&surface.transpose())
}

#[inline]
fn best_predecessor(prev_row: &[f64], col: usize) -> usize {
    let lo = col.saturating_sub(1);
    let hi = (col + 2).min(prev_row.len());
    argmin_first(prev_row, lo, hi)
}

#[inline]
fn argmin_first(row: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for c in lo + 1..hi {
        if row[c] < row[best] {
            best = c;
        }
    }
    best
}

/// Per-pixel provenance for one block: `true` takes the new block's pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeamMask {
    rows: usize,
    cols: usize,
    take_new: Vec<bool>,
}

impl SeamMask {
    pub fn filled(rows: usize, cols: usize, take_new: bool) -> SeamMask {
        SeamMask {
            rows,
            cols,
            take_new: vec![take_new; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> SeamMask {
        let mut take_new = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                take_new.push(f(r, c));
            }
        }
        SeamMask {
            rows,
            cols,
            take_new,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn take_new(&self, row: usize, col: usize) -> bool {
        self.take_new[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, v: bool) {
        self.take_new[row * self.cols + col] = v;
    }

    /// Mask for a left strip: row `r` switches to new at column `path[r]`.
    pub fn from_vertical_seam(path: &SeamPath, cols: usize) -> SeamMask {
        SeamMask::from_fn(path.len(), cols, |r, c| c >= path.0[r])
    }

    /// Mask for a top strip: column `c` switches to new at row `path[c]`.
    pub fn from_horizontal_seam(path: &SeamPath, rows: usize) -> SeamMask {
        SeamMask::from_fn(rows, path.len(), |r, c| r >= path.0[c])
    }
}

/// Full `block_size`x`block_size` merge mask for one placement.
///
/// `vertical` is the left strip surface (`block_size` rows by overlap
/// columns), `horizontal` the top strip (overlap rows by `block_size`
/// columns). In the corner both cuts apply and a pixel is new only where
/// both seams say so.
pub fn build_seam_mask(
    spec: OverlapSpec,
    block_size: usize,
    vertical: Option<&ErrorSurface>,
    horizontal: Option<&ErrorSurface>,
) -> Result<SeamMask> {
    let o = spec.width;
    let check_vertical = |s: &ErrorSurface| {
        if s.rows != block_size || s.cols != o {
            return Err(QuiltError::SpecMismatch(format!(
                "left surface is {}x{}, expected {block_size}x{o}",
                s.rows, s.cols
            )));
        }
        Ok(())
    };
    let check_horizontal = |s: &ErrorSurface| {
        if s.rows != o || s.cols != block_size {
            return Err(QuiltError::SpecMismatch(format!(
                "top surface is {}x{}, expected {o}x{block_size}",
                s.rows, s.cols
            )));
        }
        Ok(())
    };

    let mut mask = SeamMask::filled(block_size, block_size, true);
    match (spec.kind, vertical, horizontal) {
        (OverlapKind::None, None, None) => {}
        (OverlapKind::LeftOnly, Some(v), None) => {
            check_vertical(v)?;
            let (path, _) = min_cost_vertical_seam(v)?;
            for r in 0..block_size {
                for c in 0..path.0[r] {
                    mask.set(r, c, false);
                }
            }
        }
        (OverlapKind::TopOnly, None, Some(h)) => {
            check_horizontal(h)?;
            let (path, _) = min_cost_horizontal_seam(h)?;
            for c in 0..block_size {
                for r in 0..path.0[c] {
                    mask.set(r, c, false);
                }
            }
        }
        (OverlapKind::LeftAndTop, Some(v), Some(h)) => {
            check_vertical(v)?;
            check_horizontal(h)?;
            let left = SeamMask::from_vertical_seam(&min_cost_vertical_seam(v)?.0, o);
            let top = SeamMask::from_horizontal_seam(&min_cost_horizontal_seam(h)?.0, o);
            for r in 0..block_size {
                for c in 0..block_size {
                    let in_left = c < o;
                    let in_top = r < o;
                    let new = match (in_left, in_top) {
                        (true, true) => left.take_new(r, c) && top.take_new(r, c),
                        (true, false) => left.take_new(r, c),
                        (false, true) => top.take_new(r, c),
                        (false, false) => true,
                    };
                    mask.set(r, c, new);
                }
            }
        }
        (kind, v, h) => {
            return Err(QuiltError::SpecMismatch(format!(
                "{kind:?} overlap given left surface: {}, top surface: {}",
                v.is_some(),
                h.is_some()
            )))
        }
    }
    Ok(mask)
}

/// Copy the source block at `(sx, sy)` into the canvas at `(ox, oy)` wherever
/// the mask selects the new pixel.
pub fn apply_seam(
    canvas: &mut RasterImage,
    source: &RasterImage,
    sx: usize,
    sy: usize,
    ox: usize,
    oy: usize,
    mask: &SeamMask,
) -> Result<()> {
    let (h, w) = (mask.rows, mask.cols);
    if sx + w > source.width() || sy + h > source.height() || ox + w > canvas.width() || oy + h > canvas.height() {
        return Err(QuiltError::OutOfBounds(format!(
            "{w}x{h} block from ({sx},{sy}) onto ({ox},{oy})"
        )));
    }
    for r in 0..h {
        for c in 0..w {
            if mask.take_new(r, c) {
                canvas.set_pixel(ox + c, oy + r, source.pixel(sx + c, sy + r));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeamOrientation {
    Vertical,
    Horizontal,
}

/// Grayscale rendering of a surface (scaled to its maximum) with the seam in red.
pub fn render_seam(surface: &ErrorSurface, path: &SeamPath, orientation: SeamOrientation) -> RasterImage {
    let max = surface.values.iter().cloned().fold(0.0_f64, f64::max);
    let on_seam = |r: usize, c: usize| match orientation {
        SeamOrientation::Vertical => path.0.get(r) == Some(&c),
        SeamOrientation::Horizontal => path.0.get(c) == Some(&r),
    };
    RasterImage::from_fn(surface.cols, surface.rows, |c, r| {
        if on_seam(r, c) {
            [255, 0, 0]
        } else {
            let g = if max > 0.0 {
                (surface.get(r, c) / max * 255.0).round() as u8
            } else {
                0
            };
            [g, g, g]
        }
    })
    .expect("surface dims are non-zero")
}
