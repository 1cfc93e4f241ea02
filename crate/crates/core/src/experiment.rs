//! Patch-size sweeps and manifest-driven comparisons.
//!
//! Every run writes into `<out_root>/<hash>/` where the hash covers the
//! configuration and the input paths, so different runs never overwrite each
//! other. Files are staged in a hidden sibling directory and renamed into
//! place only once everything has been written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{QuiltError, Result};
use crate::metrics::{color_histogram_distance, structure_score, Method, MetricsReport, MetricsRow};
use crate::quilting::{default_overlap, TransferConfig};
use crate::raster::{load_image, save_image, ImageFormat, RasterImage};
use crate::transfer::{transfer, TransferJob};

pub const DEFAULT_SWEEP_SIZES: [usize; 4] = [5, 11, 16, 20];
pub const MONTAGE_GUTTER: usize = 4;

const WHITE: [u8; 3] = [255, 255, 255];

/// A single-row montage plus where each panel landed.
#[derive(Debug, Clone)]
pub struct Montage {
    pub image: RasterImage,
    /// `(label, x offset)` per panel, left to right.
    pub panels: Vec<(String, usize)>,
}

impl Montage {
    pub fn legend(&self) -> String {
        self.panels.iter().fold(String::new(), |mut s, (label, x)| {
            let _ = writeln!(s, "{x}\t{label}");
            s
        })
    }
}

/// Lay images out left to right on white with 4-pixel gutters. Every panel
/// is padded to the largest width and height, content at its top-left.
pub fn emit_montage(images: &[RasterImage], labels: &[String]) -> Result<Montage> {
    if images.is_empty() {
        return Err(QuiltError::EmptyList);
    }
    if labels.len() != images.len() {
        return Err(QuiltError::DimensionMismatch(format!(
            "{} labels for {} montage panels",
            labels.len(),
            images.len()
        )));
    }
    let cell_w = images.iter().map(RasterImage::width).max().unwrap_or(1);
    let cell_h = images.iter().map(RasterImage::height).max().unwrap_or(1);
    let n = images.len();
    let width = n * cell_w + (n - 1) * MONTAGE_GUTTER;
    let mut canvas = RasterImage::filled(width, cell_h, WHITE)?;
    let mut panels = Vec::with_capacity(n);
    for (i, (img, label)) in images.iter().zip(labels).enumerate() {
        let x0 = i * (cell_w + MONTAGE_GUTTER);
        blit(&mut canvas, img, x0, 0);
        panels.push((label.clone(), x0));
    }
    Ok(Montage { image: canvas, panels })
}

/// Stack images top to bottom on white with the montage gutter.
pub fn stack_rows(images: &[RasterImage]) -> Result<RasterImage> {
    if images.is_empty() {
        return Err(QuiltError::EmptyList);
    }
    let width = images.iter().map(RasterImage::width).max().unwrap_or(1);
    let height = images.iter().map(RasterImage::height).sum::<usize>() + (images.len() - 1) * MONTAGE_GUTTER;
    let mut canvas = RasterImage::filled(width, height, WHITE)?;
    let mut y = 0;
    for img in images {
        blit(&mut canvas, img, 0, y);
        y += img.height() + MONTAGE_GUTTER;
    }
    Ok(canvas)
}

fn blit(canvas: &mut RasterImage, img: &RasterImage, x0: usize, y0: usize) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            canvas.set_pixel(x0 + x, y0 + y, img.pixel(x, y));
        }
    }
}

/// Knobs shared by sweep and comparison runs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_root: PathBuf,
    /// When false, `wall_time_s` is written as `0.000` so reruns are
    /// byte-identical.
    pub record_wall_time: bool,
}

impl RunOptions {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_root: out_root.into(),
            record_wall_time: true,
        }
    }
}

fn run_hash(description: &str) -> String {
    let digest = Sha256::digest(description.as_bytes());
    hex::encode(&digest[..8])
}

/// Staging directory that is removed unless committed.
struct StagedRun {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedRun {
    fn begin(out_root: &Path, hash: &str) -> Result<StagedRun> {
        let target = out_root.join(hash);
        if target.exists() {
            return Err(QuiltError::RunExists(target));
        }
        let staging = out_root.join(format!(".{hash}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| QuiltError::io(&staging, e))?;
        }
        let images = staging.join("images");
        fs::create_dir_all(&images).map_err(|e| QuiltError::io(&images, e))?;
        Ok(StagedRun {
            staging,
            target,
            committed: false,
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.staging.join(rel)
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        fs::write(&path, bytes).map_err(|e| QuiltError::io(&path, e))
    }

    fn commit(mut self) -> Result<PathBuf> {
        fs::rename(&self.staging, &self.target).map_err(|e| QuiltError::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedRun {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn config_description(cfg: &TransferConfig, overlap: Option<usize>) -> String {
    let overlap = overlap.map_or_else(|| "auto".to_string(), |o| o.to_string());
    format!(
        "seed={} tolerance={} alpha={} overlap={overlap} version={}",
        cfg.seed,
        cfg.tolerance,
        cfg.alpha,
        env!("CARGO_PKG_VERSION")
    )
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

/// Inputs of a patch-size sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub content: PathBuf,
    pub style: PathBuf,
    pub patch_sizes: Vec<usize>,
    /// Tolerance, alpha and seed apply to every size; patch size and output
    /// dimensions are overridden per run.
    pub base: TransferConfig,
    /// Fixed overlap for all sizes; `None` uses the per-size default.
    pub overlap: Option<usize>,
}

impl SweepSpec {
    pub fn new(content: impl Into<PathBuf>, style: impl Into<PathBuf>) -> Self {
        SweepSpec {
            content: content.into(),
            style: style.into(),
            patch_sizes: DEFAULT_SWEEP_SIZES.to_vec(),
            base: TransferConfig::new(DEFAULT_SWEEP_SIZES[0], 1, 1),
            overlap: None,
        }
    }

    fn config_for(&self, patch_size: usize, content: &RasterImage) -> TransferConfig {
        TransferConfig {
            patch_size,
            overlap: self.overlap.unwrap_or_else(|| default_overlap(patch_size)),
            out_width: content.width(),
            out_height: content.height(),
            ..self.base
        }
    }

    fn description(&self) -> String {
        let sizes: Vec<String> = self.patch_sizes.iter().map(usize::to_string).collect();
        format!(
            "sweep content={} style={} sizes={} {}",
            self.content.display(),
            self.style.display(),
            sizes.join(","),
            config_description(&self.base, self.overlap)
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub run_dir: PathBuf,
    pub report: MetricsReport,
    /// Least-squares slope of color distance against patch size; `None`
    /// with fewer than two sizes.
    pub color_distance_slope: Option<f64>,
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One transfer per patch size, all with the same seed.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepOutcome> {
    if spec.patch_sizes.is_empty() {
        return Err(QuiltError::InvalidConfig("sweep needs at least one patch size".into()));
    }
    if spec.patch_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QuiltError::InvalidConfig(format!(
            "patch sizes {:?} must be strictly increasing",
            spec.patch_sizes
        )));
    }
    let content = load_image(&spec.content)?;
    let style = load_image(&spec.style)?;
    for &p in &spec.patch_sizes {
        spec.config_for(p, &content).validate_for(&style)?;
    }

    let stage = StagedRun::begin(&opts.out_root, &run_hash(&spec.description()))?;
    let stem = file_stem(&spec.content);
    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    for &p in &spec.patch_sizes {
        let cfg = spec.config_for(p, &content);
        let start = Instant::now();
        let out = transfer(&TransferJob::new(content.clone(), style.clone(), cfg))?;
        let elapsed = start.elapsed().as_secs_f64();
        save_image(&out, stage.path(&format!("images/p{p:02}.png")), ImageFormat::Png)?;
        rows.push(MetricsRow {
            image_id: format!("{stem}_p{p:02}"),
            method: None,
            patch_size: Some(p),
            color_distance: color_histogram_distance(&out, &style)?,
            structure_score: structure_score(&out, &content)?,
            wall_time_s: Some(if opts.record_wall_time { elapsed } else { 0.0 }),
        });
        outputs.push(out);
    }

    let slope = least_squares_slope(
        &rows
            .iter()
            .map(|r| (r.patch_size.unwrap_or(0) as f64, r.color_distance))
            .collect::<Vec<_>>(),
    );
    let report = MetricsReport {
        notes: vec![spec.description()],
        rows,
        with_method: false,
    };
    stage.write("metrics.csv", report.to_csv_string().as_bytes())?;

    let mut panels = vec![content.clone(), style.clone()];
    panels.extend(outputs);
    let mut labels = vec!["content".to_string(), "style".to_string()];
    labels.extend(spec.patch_sizes.iter().map(|p| format!("patch {p}")));
    let montage = emit_montage(&panels, &labels)?;
    save_image(&montage.image, stage.path("montage.png"), ImageFormat::Png)?;
    stage.write("montage.txt", montage.legend().as_bytes())?;

    let mut summary = format!("{}\n", spec.description());
    match slope {
        Some(s) => {
            let _ = writeln!(summary, "color_distance slope per pixel of patch size: {s:+.6} (reported, not asserted)");
        }
        None => summary.push_str("color_distance slope: n/a (single patch size)\n"),
    }
    stage.write("summary.txt", summary.as_bytes())?;

    Ok(SweepOutcome {
        run_dir: stage.commit()?,
        report,
        color_distance_slope: slope,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub content: PathBuf,
    pub style: PathBuf,
    pub external: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComparisonManifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug, Deserialize)]
struct RawManifestRow {
    content: String,
    style: String,
    external: Option<String>,
}

impl ComparisonManifest {
    /// Reads a `content,style,external` CSV. Relative paths are resolved
    /// against the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ComparisonManifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => QuiltError::FileNotFound(path.to_path_buf()),
            _ => QuiltError::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<ComparisonManifest> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != ["content", "style", "external"] {
            return Err(QuiltError::Manifest(format!(
                "header must be `content,style,external`, got `{}`",
                header.join(",")
            )));
        }
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<RawManifestRow>().enumerate() {
            let rec = rec.map_err(|e| QuiltError::Manifest(format!("row {}: {e}", i + 1)))?;
            if rec.content.is_empty() || rec.style.is_empty() {
                return Err(QuiltError::Manifest(format!("row {}: content and style are required", i + 1)));
            }
            rows.push(ManifestRow {
                content: resolve(&rec.content),
                style: resolve(&rec.style),
                external: rec.external.filter(|e| !e.is_empty()).map(|e| resolve(&e)),
            });
        }
        Ok(ComparisonManifest { rows })
    }

    fn description(&self, cfg: &TransferConfig) -> String {
        let mut s = format!("compare patch={} {}", cfg.patch_size, config_description(cfg, Some(cfg.overlap)));
        for row in &self.rows {
            let ext = row.external.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            let _ = write!(s, "\n{}|{}|{}", row.content.display(), row.style.display(), ext);
        }
        s
    }
}

#[derive(Debug)]
pub struct ComparisonOutcome {
    pub run_dir: PathBuf,
    pub report: MetricsReport,
    /// `(manifest row index, error)` for rows that could not be evaluated.
    pub failures: Vec<(usize, QuiltError)>,
}

struct EvaluatedRow {
    rows: Vec<MetricsRow>,
    output: RasterImage,
    panels: Vec<RasterImage>,
}

fn evaluate_row(index: usize, row: &ManifestRow, cfg: &TransferConfig, opts: &RunOptions) -> Result<EvaluatedRow> {
    let load = |p: &Path| {
        load_image(p).map_err(|e| QuiltError::Manifest(format!("row {}: {}: {e}", index + 1, p.display())))
    };
    let content = load(&row.content)?;
    let style = load(&row.style)?;
    let external = row.external.as_deref().map(load).transpose()?;
    if let Some(ext) = &external {
        if (ext.width(), ext.height()) != (content.width(), content.height()) {
            return Err(QuiltError::Manifest(format!(
                "row {}: external output is {}x{}, content is {}x{}",
                index + 1,
                ext.width(),
                ext.height(),
                content.width(),
                content.height()
            )));
        }
    }

    let id = format!("row{:03}_{}", index + 1, file_stem(&row.content));
    let start = Instant::now();
    let output = transfer(&TransferJob::new(content.clone(), style.clone(), *cfg))?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut rows = vec![MetricsRow {
        image_id: id.clone(),
        method: Some(Method::Traditional),
        patch_size: Some(cfg.patch_size),
        color_distance: color_histogram_distance(&output, &style)?,
        structure_score: structure_score(&output, &content)?,
        wall_time_s: Some(if opts.record_wall_time { elapsed } else { 0.0 }),
    }];
    let mut panels = vec![content.clone(), style.clone(), output.clone()];
    if let Some(ext) = external {
        rows.push(MetricsRow {
            image_id: id,
            method: Some(Method::External),
            patch_size: None,
            color_distance: color_histogram_distance(&ext, &style)?,
            structure_score: structure_score(&ext, &content)?,
            wall_time_s: None,
        });
        panels.push(ext);
    }
    Ok(EvaluatedRow { rows, output, panels })
}

/// Traditional transfer on every manifest row, scored next to the row's
/// external output when one is given. Bad rows are collected in
/// `failures`; the run is still written for the rest.
pub fn run_comparison(manifest: &ComparisonManifest, cfg: &TransferConfig, opts: &RunOptions) -> Result<ComparisonOutcome> {
    cfg.validate_params()?;
    let stage = StagedRun::begin(&opts.out_root, &run_hash(&manifest.description(cfg)))?;

    let results: Vec<Result<EvaluatedRow>> = manifest
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| evaluate_row(i, row, cfg, opts))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut montage_rows = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(eval) => {
                let id = &eval.rows[0].image_id;
                save_image(&eval.output, stage.path(&format!("images/{id}.png")), ImageFormat::Png)?;
                let mut labels = vec!["content".to_string(), "style".into(), "traditional".into()];
                if eval.panels.len() == 4 {
                    labels.push("external".into());
                }
                montage_rows.push(emit_montage(&eval.panels, &labels)?.image);
                rows.extend(eval.rows);
            }
            Err(e) => failures.push((i, e)),
        }
    }

    let mut notes = vec![manifest.description(cfg).lines().next().unwrap_or_default().to_string()];
    notes.extend(failures.iter().map(|(i, e)| format!("row {} failed: {e}", i + 1)));
    let report = MetricsReport {
        notes,
        rows,
        with_method: true,
    };
    stage.write("metrics.csv", report.to_csv_string().as_bytes())?;
    if !montage_rows.is_empty() {
        save_image(&stack_rows(&montage_rows)?, stage.path("montage.png"), ImageFormat::Png)?;
    }

    Ok(ComparisonOutcome {
        run_dir: stage.commit()?,
        report,
        failures,
    })
}
