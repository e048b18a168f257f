//! Raster primitives: page loading, Otsu binarization, projection profiles
//! and vertical strip division.

use std::path::Path;

use image::{ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Intensity used for paper background.
pub const BACKGROUND: u8 = 255;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Argument(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single intensity.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Argument(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(GrayImage { width: w, height: h, data })
    }

    /// Full-width band of rows `top..=bottom`.
    pub fn rows(&self, top: usize, bottom: usize) -> Result<GrayImage> {
        if top > bottom {
            return Err(Error::Argument(format!("row band {top}..={bottom} is empty")));
        }
        self.crop(0, top, self.width, bottom + 1 - top)
    }

    /// Rotation by 90° counter-clockwise: row `r` of the input becomes column `r`
    /// of the output, so a top-to-bottom scan turns into a left-to-right scan.
    pub fn rotate_ccw(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    /// Rotation by 90° clockwise (inverse of [`GrayImage::rotate_ccw`]).
    pub fn rotate_cw(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    /// Horizontal concatenation of images with equal height.
    pub fn hconcat(parts: &[GrayImage]) -> Result<GrayImage> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        let height = first.height;
        if parts.iter().any(|p| p.height != height) {
            return Err(Error::Argument("concatenated images differ in height".into()));
        }
        let width: usize = parts.iter().map(|p| p.width).sum();
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for p in parts {
                data.extend_from_slice(p.row(y));
            }
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .ok_or_else(|| Error::Format("raster buffer size mismatch".into()))?;
        buf.save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    /// Encodes the image as binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// ITU-R BT.601 luma of an RGB triple, rounded to the nearest integer.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Loads a PNG or binary PGM page. Color inputs are reduced to BT.601 luma.
pub fn load_page(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(Error::io_at(path))?.with_guessed_format().map_err(Error::io_at(path))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(Error::Format(format!("{}: unsupported image format {other:?}", path.display())));
        }
        None => return Err(Error::Format(format!("{}: unrecognised image format", path.display()))),
    }
    let decoded = reader.decode()?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data = if decoded.color().has_color() {
        decoded
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect()
    } else {
        decoded.to_luma8().into_raw()
    };
    GrayImage::new(width, height, data)
}

/// Foreground mask; `true` marks ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::Argument(format!(
                "mask length {} does not match {width}x{height}",
                mask.len()
            )));
        }
        Ok(Self { width, height, mask })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, mask: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.mask[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<BinaryImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Argument(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} mask",
                self.width, self.height
            )));
        }
        let mut mask = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            mask.extend_from_slice(&self.mask[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(BinaryImage { width: w, height: h, mask })
    }

    /// Renders ink as 0 and background as 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.mask.iter().map(|&b| if b { 0 } else { BACKGROUND }).collect(),
        }
    }
}

/// Otsu threshold of the intensity histogram. Pixels `<= t` form the dark
/// class. Returns `None` for constant images.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let total = img.data().len() as f64;
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let mut best = (f64::NEG_INFINITY, 0u8);
    for (t, &c) in hist.iter().enumerate().take(255) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Some(best.1)
}

/// Global Otsu binarization; constant images are all background.
pub fn binarize(img: &GrayImage) -> BinaryImage {
    match otsu_threshold(img) {
        None => BinaryImage::empty(img.width(), img.height()),
        Some(t) => BinaryImage {
            width: img.width(),
            height: img.height(),
            mask: img.data().iter().map(|&v| v <= t).collect(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// One count per row.
    Horizontal,
    /// One count per column.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionProfile {
    pub axis: Axis,
    pub counts: Vec<usize>,
}

impl ProjectionProfile {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

pub fn projection(img: &BinaryImage, axis: Axis) -> ProjectionProfile {
    let counts = match axis {
        Axis::Horizontal => img
            .mask
            .chunks_exact(img.width)
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect(),
        Axis::Vertical => {
            let mut counts = vec![0usize; img.width];
            for row in img.mask.chunks_exact(img.width) {
                for (c, &b) in counts.iter_mut().zip(row) {
                    *c += usize::from(b);
                }
            }
            counts
        }
    };
    ProjectionProfile { axis, counts }
}

/// Column ranges `[start, end)` of `n` near-equal vertical strips; the first
/// `width % n` strips are one pixel wider.
pub fn strip_bounds(width: usize, n: usize) -> Result<Vec<(usize, usize)>> {
    if n == 0 || n > width {
        return Err(Error::Argument(format!(
            "strip count {n} must be in 1..={width}"
        )));
    }
    let (base, extra) = (width / n, width % n);
    let mut bounds = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let w = base + usize::from(i < extra);
        bounds.push((start, start + w));
        start += w;
    }
    Ok(bounds)
}

pub fn split_strips(img: &GrayImage, n: usize) -> Result<Vec<GrayImage>> {
    strip_bounds(img.width(), n)?
        .into_iter()
        .map(|(a, b)| img.crop(a, 0, b - a, img.height()))
        .collect()
}
