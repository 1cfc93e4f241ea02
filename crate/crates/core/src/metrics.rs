//! Proxy metrics for colour-style retention and line-pattern fidelity.
//!
//! Neither metric is a perceptual measure. `color_distance` compares joint
//! RGB histograms; `structure_score` compares luminance gradient
//! orientations. Report headers say so.

use std::io::Write;

use crate::error::{QuiltError, Result};
use crate::raster::{to_luminance, LuminanceMap, RasterImage};

pub const BINS_PER_CHANNEL: usize = 8;
pub const HISTOGRAM_BINS: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;
pub const DEFAULT_GRADIENT_THRESHOLD: f64 = 0.05;

/// Normalised joint RGB histogram, 8 bins per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    counts: Vec<f64>,
}

impl ColorHistogram {
    pub fn of(img: &RasterImage) -> ColorHistogram {
        let mut raw = vec![0u64; HISTOGRAM_BINS];
        for px in img.pixels().chunks_exact(3) {
            let bin = |v: u8| (v as usize * BINS_PER_CHANNEL) / 256;
            raw[(bin(px[0]) * BINS_PER_CHANNEL + bin(px[1])) * BINS_PER_CHANNEL + bin(px[2])] += 1;
        }
        let total = (img.width() * img.height()) as f64;
        ColorHistogram {
            counts: raw.into_iter().map(|c| c as f64 / total).collect(),
        }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// `0.5 * sum (a - b)^2 / (a + b)`, skipping bins empty in both.
    pub fn chi_square(&self, other: &ColorHistogram) -> f64 {
        let d: f64 = self
            .counts
            .iter()
            .zip(&other.counts)
            .filter(|(a, b)| *a + *b > 0.0)
            .map(|(a, b)| (a - b) * (a - b) / (a + b))
            .sum();
        (0.5 * d).clamp(0.0, 1.0)
    }
}

pub fn color_histogram_distance(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.pixels().is_empty() || b.pixels().is_empty() {
        return Err(QuiltError::EmptyImage);
    }
    Ok(ColorHistogram::of(a).chi_square(&ColorHistogram::of(b)))
}

/// Central-difference gradient at an interior pixel.
#[inline]
fn gradient(lum: &LuminanceMap, x: usize, y: usize) -> (f64, f64) {
    (
        (lum.get(x + 1, y) - lum.get(x - 1, y)) / 2.0,
        (lum.get(x, y + 1) - lum.get(x, y - 1)) / 2.0,
    )
}

/// Mean `|cos|` of the angle between luminance gradients of the two images,
/// over interior pixels where both gradient magnitudes exceed `threshold`.
/// Zero when no pixel qualifies.
pub fn structure_score_with(output: &RasterImage, content: &RasterImage, threshold: f64) -> Result<f64> {
    if output.width() != content.width() || output.height() != content.height() {
        return Err(QuiltError::DimensionMismatch(format!(
            "output {}x{} vs content {}x{}",
            output.width(),
            output.height(),
            content.width(),
            content.height()
        )));
    }
    let (a, b) = (to_luminance(output), to_luminance(content));
    let (w, h) = (a.width(), a.height());
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let (ax, ay) = gradient(&a, x, y);
            let (bx, by) = gradient(&b, x, y);
            let (na, nb) = (ax.hypot(ay), bx.hypot(by));
            if na > threshold && nb > threshold {
                sum += ((ax * bx + ay * by) / (na * nb)).abs().min(1.0);
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

pub fn structure_score(output: &RasterImage, content: &RasterImage) -> Result<f64> {
    structure_score_with(output, content, DEFAULT_GRADIENT_THRESHOLD)
}

pub const METRICS_HEADER: [&str; 5] = ["image_id", "patch_size", "color_distance", "structure_score", "wall_time_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Traditional,
    External,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Traditional => "traditional",
            Method::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub image_id: String,
    pub method: Option<Method>,
    /// `None` for externally produced images.
    pub patch_size: Option<usize>,
    pub color_distance: f64,
    pub structure_score: f64,
    /// `None` when not measured.
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    /// Free-form lines written as `# ...` comments above the header.
    pub notes: Vec<String>,
    pub rows: Vec<MetricsRow>,
    /// Adds the `method` column after `image_id`.
    pub with_method: bool,
}

impl MetricsReport {
    pub const PROXY_NOTE: &'static str = "proxy metrics: color_distance = chi-square distance of 8x8x8 RGB histograms (output vs style); \
         structure_score = mean |cos| of luminance gradient angles (output vs content)";

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        for note in std::iter::once(Self::PROXY_NOTE).chain(self.notes.iter().map(String::as_str)) {
            writeln!(out, "# {note}").map_err(|e| QuiltError::io("<csv>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = METRICS_HEADER.to_vec();
        if self.with_method {
            header.insert(1, "method");
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.image_id.clone()];
            if self.with_method {
                rec.push(row.method.map(Method::as_str).unwrap_or_default().to_string());
            }
            rec.push(row.patch_size.map(|p| p.to_string()).unwrap_or_default());
            rec.push(format!("{:.6}", row.color_distance));
            rec.push(format!("{:.6}", row.structure_score));
            rec.push(row.wall_time_s.map(|t| format!("{t:.3}")).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| QuiltError::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
