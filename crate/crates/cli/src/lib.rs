//! `quilt` command line: `synth`, `transfer`, `sweep` and `compare`.
//!
//! Exit codes: 0 on success, 1 on runtime failures (I/O, bad images,
//! failed manifest rows), 2 on usage errors (unknown flags, invalid
//! configuration).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use quilt_core::experiment::{run_comparison, run_sweep, ComparisonManifest, RunOptions, SweepSpec};
use quilt_core::quilting::{
    default_overlap, synthesize_observed, Placement, TransferConfig, DEFAULT_ALPHA, DEFAULT_SEED, DEFAULT_TOLERANCE,
};
use quilt_core::raster::{load_image, save_image, ImageFormat};
use quilt_core::seam::{min_cost_horizontal_seam, min_cost_vertical_seam, render_seam, SeamOrientation};
use quilt_core::transfer::{transfer_observed, TransferJob};
use quilt_core::QuiltError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const THREADS_ENV: &str = "QUILT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "quilt", version, about = "Patch quilting texture synthesis and transfer")]
struct Cli {
    /// Worker threads for candidate search [default: $QUILT_THREADS, else all cores]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grow a texture sample into a larger image
    Synth(SynthArgs),
    /// Re-render a content image out of blocks of a style image
    Transfer(TransferArgs),
    /// Run transfer once per patch size and score the results
    Sweep(SweepArgs),
    /// Run transfer over a manifest and score it next to external outputs
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct QuiltFlags {
    /// Block edge length in pixels
    #[arg(long, default_value_t = 11, value_name = "PX")]
    patch_size: usize,

    /// Overlap between neighbouring blocks [default: max(1, round(patch-size / 6))]
    #[arg(long, value_name = "PX")]
    overlap: Option<usize>,

    /// Candidates within (1 + tolerance) of the best overlap error are kept
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,

    /// Seed for block selection
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl QuiltFlags {
    fn config(&self, alpha: f64, width: usize, height: usize) -> TransferConfig {
        TransferConfig {
            patch_size: self.patch_size,
            overlap: self.overlap.unwrap_or_else(|| default_overlap(self.patch_size)),
            tolerance: self.tolerance,
            alpha,
            seed: self.seed,
            out_width: width,
            out_height: height,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Texture sample (PNG or P6 PPM)
    #[arg(long)]
    style: PathBuf,

    /// Output image; `.ppm` writes PPM, anything else PNG
    #[arg(long)]
    out: PathBuf,

    #[arg(long)]
    width: usize,

    #[arg(long)]
    height: usize,

    #[command(flatten)]
    quilt: QuiltFlags,

    /// Directory for per-block seam renderings
    #[arg(long, value_name = "DIR")]
    debug_seams: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransferArgs {
    #[arg(long)]
    content: PathBuf,

    #[arg(long)]
    style: PathBuf,

    #[arg(long)]
    out: PathBuf,

    #[command(flatten)]
    quilt: QuiltFlags,

    /// Weight of the overlap term against the luminance correspondence term
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// Directory for per-block seam renderings
    #[arg(long, value_name = "DIR")]
    debug_seams: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    content: PathBuf,

    #[arg(long)]
    style: PathBuf,

    /// Comma-separated patch sizes, strictly increasing
    #[arg(long, value_delimiter = ',', default_value = "5,11,16,20")]
    sizes: Vec<usize>,

    /// Overlap for every size [default: max(1, round(patch-size / 6)) per size]
    #[arg(long, value_name = "PX")]
    overlap: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Root under which the run directory `<hash>/` is created
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Write 0 instead of measured wall time so reruns are byte-identical
    #[arg(long)]
    no_wall_time: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// CSV with header `content,style,external`
    #[arg(long)]
    manifest: PathBuf,

    #[command(flatten)]
    quilt: QuiltFlags,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    #[arg(long)]
    no_wall_time: bool,
}

/// Parse `argv` (program name first), run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };

    let threads = match cli.threads.map(Ok).or_else(threads_from_env).transpose() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };

    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn threads_from_env() -> Option<Result<usize, String>> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    Some(match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("{THREADS_ENV}={raw:?} is not a positive integer")),
    })
}

fn dispatch(command: Command) -> Result<i32, QuiltError> {
    match command {
        Command::Synth(args) => {
            let style = load_image(&args.style)?;
            let cfg = args.quilt.config(DEFAULT_ALPHA, args.width, args.height);
            let mut seams = SeamDumper::new(args.debug_seams)?;
            let out = synthesize_observed(&style, &cfg, &mut |p: &Placement<'_>| seams.record(p))?;
            seams.finish()?;
            save_image(&out, &args.out, ImageFormat::from_path(&args.out))?;
            Ok(EXIT_OK)
        }
        Command::Transfer(args) => {
            let content = load_image(&args.content)?;
            let style = load_image(&args.style)?;
            let cfg = args.quilt.config(args.alpha, content.width(), content.height());
            let job = TransferJob::new(content, style, cfg);
            let mut seams = SeamDumper::new(args.debug_seams)?;
            let out = transfer_observed(&job, &mut |p: &Placement<'_>| seams.record(p))?;
            seams.finish()?;
            save_image(&out, &args.out, ImageFormat::from_path(&args.out))?;
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let mut base = TransferConfig::new(args.sizes.first().copied().unwrap_or(2), 1, 1);
            base.tolerance = args.tolerance;
            base.alpha = args.alpha;
            base.seed = args.seed;
            let spec = SweepSpec {
                content: args.content,
                style: args.style,
                patch_sizes: args.sizes,
                base,
                overlap: args.overlap,
            };
            let opts = run_options(args.out_dir, args.no_wall_time)?;
            let outcome = run_sweep(&spec, &opts)?;
            println!("{}", outcome.run_dir.display());
            if let Some(slope) = outcome.color_distance_slope {
                println!("color_distance slope across patch sizes: {slope:+.6} (reported, not asserted)");
            }
            Ok(EXIT_OK)
        }
        Command::Compare(args) => {
            let manifest = ComparisonManifest::load(&args.manifest)?;
            let cfg = args.quilt.config(args.alpha, args.quilt.patch_size, args.quilt.patch_size);
            let opts = run_options(args.out_dir, args.no_wall_time)?;
            let outcome = run_comparison(&manifest, &cfg, &opts)?;
            println!("{}", outcome.run_dir.display());
            for (row, err) in &outcome.failures {
                eprintln!("error: manifest row {}: {err}", row + 1);
            }
            Ok(if outcome.failures.is_empty() { EXIT_OK } else { EXIT_RUNTIME })
        }
    }
}

fn run_options(out_dir: PathBuf, no_wall_time: bool) -> Result<RunOptions, QuiltError> {
    fs::create_dir_all(&out_dir).map_err(|e| QuiltError::Io {
        path: out_dir.clone(),
        source: e,
    })?;
    Ok(RunOptions {
        out_root: out_dir,
        record_wall_time: !no_wall_time,
    })
}

/// Writes `block####_left.png` / `block####_top.png` seam renderings.
struct SeamDumper {
    dir: Option<PathBuf>,
    error: Option<QuiltError>,
}

impl SeamDumper {
    fn new(dir: Option<PathBuf>) -> Result<Self, QuiltError> {
        if let Some(dir) = &dir {
            fs::create_dir_all(dir).map_err(|e| QuiltError::Io {
                path: dir.clone(),
                source: e,
            })?;
        }
        Ok(SeamDumper { dir, error: None })
    }

    fn record(&mut self, placement: &Placement<'_>) {
        let Some(dir) = &self.dir else { return };
        if self.error.is_some() {
            return;
        }
        if let Err(e) = dump_placement(dir, placement) {
            self.error = Some(e);
        }
    }

    fn finish(self) -> Result<(), QuiltError> {
        self.error.map_or(Ok(()), Err)
    }
}

fn dump_placement(dir: &Path, placement: &Placement<'_>) -> Result<(), QuiltError> {
    if let Some(surface) = placement.left_surface {
        let (path, _) = min_cost_vertical_seam(surface)?;
        let img = render_seam(surface, &path, SeamOrientation::Vertical);
        save_image(&img, dir.join(format!("block{:04}_left.png", placement.index)), ImageFormat::Png)?;
    }
    if let Some(surface) = placement.top_surface {
        let (path, _) = min_cost_horizontal_seam(surface)?;
        let img = render_seam(surface, &path, SeamOrientation::Horizontal);
        save_image(&img, dir.join(format!("block{:04}_top.png", placement.index)), ImageFormat::Png)?;
    }
    Ok(())
}
