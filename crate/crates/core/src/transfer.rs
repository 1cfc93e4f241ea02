//! Content-guided quilting.
//!
//! Same placement loop as [`crate::quilting::synthesize`], except candidates
//! are also scored on how well the style block's luminance matches the
//! content image under the slot. The luminance term is a reconstruction:
//! nothing beyond "match the overlap" is prescribed for block choice, so the
//! guidance channel is kept simple and swappable.

use crate::error::{QuiltError, Result};
use crate::quilting::{quilt, Guidance, Placement, PlacementObserver, TransferConfig};
use crate::raster::{to_luminance, LuminanceMap, RasterImage};

#[derive(Debug, Clone)]
pub struct TransferJob {
    pub content: RasterImage,
    pub style: RasterImage,
    pub cfg: TransferConfig,
    content_lum: LuminanceMap,
    style_lum: LuminanceMap,
}

impl TransferJob {
    /// Builds the job; the output size in `cfg` is replaced by the content size.
    pub fn new(content: RasterImage, style: RasterImage, cfg: TransferConfig) -> Self {
        let cfg = TransferConfig {
            out_width: content.width(),
            out_height: content.height(),
            ..cfg
        };
        TransferJob {
            content_lum: to_luminance(&content),
            style_lum: to_luminance(&style),
            content,
            style,
            cfg,
        }
    }

    pub fn content_luminance(&self) -> &LuminanceMap {
        &self.content_lum
    }

    pub fn style_luminance(&self) -> &LuminanceMap {
        &self.style_lum
    }
}

/// Sum of squared luminance differences between two `p`x`p` windows.
pub fn correspondence_error(
    style_lum: &LuminanceMap,
    sx: usize,
    sy: usize,
    content_lum: &LuminanceMap,
    cx: usize,
    cy: usize,
    p: usize,
) -> Result<f64> {
    if sx + p > style_lum.width() || sy + p > style_lum.height() || cx + p > content_lum.width() || cy + p > content_lum.height()
    {
        return Err(QuiltError::OutOfBounds(format!(
            "{p}x{p} window at style ({sx},{sy}) / content ({cx},{cy})"
        )));
    }
    let mut sum = 0.0;
    for dy in 0..p {
        for dx in 0..p {
            let d = style_lum.get(sx + dx, sy + dy) - content_lum.get(cx + dx, cy + dy);
            sum += d * d;
        }
    }
    Ok(sum)
}

pub fn transfer(job: &TransferJob) -> Result<RasterImage> {
    transfer_observed(job, &mut |_: &Placement<'_>| {})
}

pub fn transfer_observed(job: &TransferJob, observer: &mut dyn PlacementObserver) -> Result<RasterImage> {
    let guidance = Guidance {
        style: &job.style_lum,
        content: &job.content_lum,
    };
    quilt(&job.style, &job.cfg, Some(guidance), observer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_windows_have_zero_error() {
        let img = RasterImage::from_fn(8, 8, |x, y| [(x * 30) as u8, (y * 20) as u8, 9]).unwrap();
        let lum = to_luminance(&img);
        assert_eq!(correspondence_error(&lum, 2, 1, &lum, 2, 1, 5).unwrap(), 0.0);
    }

    #[test]
    fn black_against_white_window() {
        let black = to_luminance(&RasterImage::filled(5, 5, [0, 0, 0]).unwrap());
        let white = to_luminance(&RasterImage::filled(5, 5, [255, 255, 255]).unwrap());
        assert_eq!(correspondence_error(&black, 0, 0, &white, 0, 0, 5).unwrap(), 25.0);
        assert!(correspondence_error(&black, 1, 0, &white, 0, 0, 5).is_err());
    }

    #[test]
    fn output_matches_content_size() {
        let content = RasterImage::from_fn(21, 17, |x, y| [(x * 10) as u8, (y * 12) as u8, 0]).unwrap();
        let style = RasterImage::from_fn(16, 16, |x, y| [((x ^ y) * 16) as u8, 40, 200]).unwrap();
        let job = TransferJob::new(content, style, TransferConfig::new(5, 1, 1));
        let out = transfer(&job).unwrap();
        assert_eq!((out.width(), out.height()), (21, 17));
    }
}
