//! Patch quilting for texture synthesis and texture transfer.
//!
//! The pipeline lays square blocks from a source texture onto a canvas in
//! raster order, picks each block at random among the positions whose
//! overlap with already placed blocks is within a tolerance of the best,
//! and merges it along a minimum-error boundary cut. Transfer adds a
//! luminance correspondence term so the output follows a content image.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod quilting;
pub mod raster;
pub mod seam;
pub mod transfer;

pub use error::{QuiltError, Result};
pub use quilting::{synthesize, TransferConfig};
pub use raster::{load_image, save_image, ImageFormat, RasterImage};
pub use transfer::{transfer, TransferJob};
