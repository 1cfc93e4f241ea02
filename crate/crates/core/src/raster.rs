//! Opaque 8-bit RGB rasters, PNG/PPM codecs and luminance maps.
//!
//! PNG goes through the `image` crate. Binary PPM (P6, maxval 255) is
//! parsed and written here so test fixtures can be written byte by byte.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use image::{DynamicImage, ImageEncoder};

use crate::error::{QuiltError, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Row-major 8-bit RGB image with at least one pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(QuiltError::EmptyImage);
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| QuiltError::DimensionMismatch(format!("{width}x{height} overflows")))?;
        if pixels.len() != expected {
            return Err(QuiltError::DimensionMismatch(format!(
                "{width}x{height} image needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with one colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.repeat(width * height);
        Self::new(width, height, pixels)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub(crate) fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// The three bytes of row `y` starting at column `x`, `len` pixels long.
    #[inline]
    pub(crate) fn row_span(&self, x: usize, y: usize, len: usize) -> &[u8] {
        let i = (y * self.width + x) * 3;
        &self.pixels[i..i + len * 3]
    }
}

/// Output container for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    /// `.ppm` selects PPM; everything else is written as PNG.
    pub fn from_path(path: &Path) -> ImageFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ppm") => ImageFormat::Ppm,
            _ => ImageFormat::Png,
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => QuiltError::FileNotFound(path.to_path_buf()),
        _ => QuiltError::io(path, e),
    })?;
    decode_image(&bytes)
}

/// Decode PNG or P6 bytes, sniffing the container from the magic number.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(QuiltError::UnsupportedFormat(
            "expected a PNG or binary PPM (P6) stream".into(),
        ))
    }
}

fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| QuiltError::CorruptData(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        DynamicImage::ImageRgb8(buf) => buf.into_raw(),
        other if !other.color().has_alpha() => other.to_rgb8().into_raw(),
        other => other
            .to_rgba8()
            .into_raw()
            .chunks_exact(4)
            .flat_map(|px| {
                let a = px[3] as u32;
                let over_white = |c: u8| ((c as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
                [over_white(px[0]), over_white(px[1]), over_white(px[2])]
            })
            .collect(),
    };
    RasterImage::new(width, height, pixels)
}

fn decode_ppm(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each header token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(QuiltError::CorruptData("malformed PPM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| QuiltError::CorruptData("PPM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(QuiltError::UnsupportedFormat(format!(
            "PPM maxval {maxval} (only 255 is supported)"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(QuiltError::CorruptData("malformed PPM header".into())),
    }
    if width == 0 || height == 0 {
        return Err(QuiltError::CorruptData("PPM has zero dimension".into()));
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| QuiltError::CorruptData("PPM dimensions overflow".into()))?;
    let data = bytes
        .get(pos..pos + len)
        .ok_or_else(|| QuiltError::CorruptData(format!("PPM truncated: need {len} pixel bytes")))?;
    RasterImage::new(width, height, data.to_vec())
}

pub fn encode_image(img: &RasterImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Ppm => {
            let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend_from_slice(&img.pixels);
            Ok(out)
        }
        ImageFormat::Png => {
            let mut out = Vec::new();
            image::codecs::png::PngEncoder::new(&mut out)
                .write_image(
                    &img.pixels,
                    img.width as u32,
                    img.height as u32,
                    image::ExtendedColorType::Rgb8,
                )
                .map_err(|e| QuiltError::CorruptData(e.to_string()))?;
            Ok(out)
        }
    }
}

pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, format)?;
    fs::write(path, bytes).map_err(|e| QuiltError::io(path, e))
}

/// Exact sub-rectangle copy.
pub fn crop(img: &RasterImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<RasterImage> {
    if w == 0 || h == 0 || x0 + w > img.width || y0 + h > img.height {
        return Err(QuiltError::OutOfBounds(format!(
            "crop {w}x{h} at ({x0},{y0}) from {}x{} image",
            img.width, img.height
        )));
    }
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in y0..y0 + h {
        pixels.extend_from_slice(img.row_span(x0, y, w));
    }
    RasterImage::new(w, h, pixels)
}

/// Row-major luminance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LuminanceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Rec. 601 luma scaled to `[0, 1]`.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    let v = (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0;
    v.clamp(0.0, 1.0)
}

pub fn to_luminance(img: &RasterImage) -> LuminanceMap {
    let values = img
        .pixels
        .chunks_exact(3)
        .map(|px| luma([px[0], px[1], px[2]]))
        .collect();
    LuminanceMap {
        width: img.width,
        height: img.height,
        values,
    }
}
