//! Sliding-window feature extraction: local gradient histograms (LGH),
//! Gabor band energies, and silence-zone detection.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::digest::config_digest;
use crate::error::{Error, Result};
use crate::imgproc::{BinaryImage, GrayImage, BACKGROUND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlidingWindowConfig {
    pub window_width: usize,
    pub overlap: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub orientation_bins: usize,
}

impl Default for SlidingWindowConfig {
    fn default() -> Self {
        Self { window_width: 34, overlap: 0.5, grid_rows: 4, grid_cols: 4, orientation_bins: 16 }
    }
}

impl SlidingWindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Argument(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 || self.orientation_bins == 0 {
            return Err(Error::Argument("grid and orientation bins must be positive".into()));
        }
        if self.window_width < self.grid_cols.max(3) {
            return Err(Error::Argument(format!(
                "window width {} smaller than grid columns {}",
                self.window_width, self.grid_cols
            )));
        }
        if self.stride() == 0 {
            return Err(Error::Argument("window stride rounds to zero".into()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.grid_rows * self.grid_cols * self.orientation_bins
    }

    pub fn stride(&self) -> usize {
        (self.window_width as f64 * (1.0 - self.overlap)).round() as usize
    }

    pub fn digest(&self) -> String {
        config_digest(self)
    }
}

/// Left edges of the windows covering `[0, width)`: multiples of `stride`
/// up to the first window that reaches the end. That last window may run
/// past `width`; callers pad it with background.
pub fn window_positions(width: usize, window: usize, stride: usize) -> Vec<usize> {
    if width == 0 || window == 0 || stride == 0 {
        return Vec::new();
    }
    let extra = width.saturating_sub(window);
    let n = extra.div_ceil(stride) + 1;
    (0..n).map(|i| i * stride).collect()
}

/// T×D frames ordered along the scan axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Array2<f64>,
    /// Left-edge offset of each frame's window along the scan axis.
    pub positions: Vec<usize>,
    pub window: usize,
    pub config_digest: String,
}

const FSEQ_MAGIC: &[u8; 4] = b"FSEQ";
const FSEQ_VERSION: u32 = 1;

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.frames.row(t)
    }

    /// Keeps only frames where `keep[t]` is true.
    pub fn select(&self, keep: &[bool]) -> FeatureSequence {
        assert_eq!(keep.len(), self.len(), "selection mask length mismatch");
        let idx: Vec<usize> = (0..self.len()).filter(|&t| keep[t]).collect();
        let mut frames = Array2::zeros((idx.len(), self.dim()));
        for (r, &t) in idx.iter().enumerate() {
            frames.row_mut(r).assign(&self.frames.row(t));
        }
        FeatureSequence {
            frames,
            positions: idx.iter().map(|&t| self.positions[t]).collect(),
            window: self.window,
            config_digest: self.config_digest.clone(),
        }
    }

    /// Binary layout: magic `FSEQ`, version, T, D as u32 LE, then T×D
    /// row-major f64 LE. Positions and digest are not stored.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.frames.len());
        out.extend_from_slice(FSEQ_MAGIC);
        out.extend_from_slice(&FSEQ_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for v in self.frames.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`FeatureSequence::to_bytes`]; positions become frame indices.
    pub fn from_bytes(bytes: &[u8]) -> Result<FeatureSequence> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated feature file".into()))?;
        if &magic != FSEQ_MAGIC {
            return Err(Error::Format("not a feature sequence file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FSEQ_VERSION {
            return Err(Error::Format(format!("unsupported feature file version {version}")));
        }
        let t = read_u32(&mut r)? as usize;
        let d = read_u32(&mut r)? as usize;
        if r.len() != t * d * 8 {
            return Err(Error::Format(format!(
                "feature payload is {} bytes, expected {}",
                r.len(),
                t * d * 8
            )));
        }
        let data: Vec<f64> = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let frames = Array2::from_shape_vec((t, d), data)
            .map_err(|e| Error::Format(format!("feature shape: {e}")))?;
        Ok(FeatureSequence { frames, positions: (0..t).collect(), window: 0, config_digest: String::new() })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(Error::io_at(path))?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
        let path = path.as_ref();
        FeatureSequence::from_bytes(&std::fs::read(path).map_err(Error::io_at(path))?)
    }
}

pub(crate) fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

/// Central-difference gradient field with replicate padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

pub fn gradient(img: &GrayImage) -> Result<Gradient> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::Argument(format!("gradient needs at least 3x3, got {w}x{h}")));
    }
    Ok(gradient_unchecked(img))
}

fn gradient_unchecked(img: &GrayImage) -> Gradient {
    let (w, h) = (img.width(), img.height());
    let px = |x: usize, y: usize| f64::from(img.get(x, y));
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            gx.push(px(xr, y) - px(xl, y));
            gy.push(px(x, yd) - px(x, yu));
        }
    }
    Gradient { width: w, height: h, gx, gy }
}

/// Orientation bin of `atan2(gy, gx)` over `[0, 2π)` split into `bins` arcs.
#[inline]
pub fn orientation_bin(gx: f64, gy: f64, bins: usize) -> usize {
    let mut phi = gy.atan2(gx);
    if phi < 0.0 {
        phi += TAU;
    }
    // axis-aligned gradients land exactly on arc boundaries; nudge past rounding
    let t = phi * bins as f64 / TAU + 1e-9;
    (t.floor() as usize) % bins
}

/// Unnormalized cell-by-cell orientation histograms of a patch.
pub fn lgh_histogram(patch: &GrayImage, cfg: &SlidingWindowConfig) -> Vec<f64> {
    let (w, h) = (patch.width(), patch.height());
    let bins = cfg.orientation_bins;
    let mut hist = vec![0.0; cfg.dimension()];
    let g = gradient_unchecked(patch);
    for y in 0..h {
        let cr = y * cfg.grid_rows / h;
        for x in 0..w {
            let cc = x * cfg.grid_cols / w;
            let (gx, gy) = (g.gx[y * w + x], g.gy[y * w + x]);
            let m = (gx * gx + gy * gy).sqrt();
            if m == 0.0 {
                continue;
            }
            let b = orientation_bin(gx, gy, bins);
            hist[(cr * cfg.grid_cols + cc) * bins + b] += m;
        }
    }
    hist
}

/// LGH descriptor of one window: row-major concatenation of cell histograms,
/// L2-normalized (zero vectors stay zero).
pub fn lgh_window(patch: &GrayImage, cfg: &SlidingWindowConfig) -> Result<Vec<f64>> {
    if patch.width() < cfg.grid_cols || patch.height() < cfg.grid_rows {
        return Err(Error::Argument(format!(
            "patch {}x{} smaller than {}x{} grid",
            patch.width(),
            patch.height(),
            cfg.grid_cols,
            cfg.grid_rows
        )));
    }
    let mut v = lgh_histogram(patch, cfg);
    l2_normalize(&mut v);
    Ok(v)
}

pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Left-to-right LGH sequence over a line image.
pub fn sliding_lgh(line: &GrayImage, cfg: &SlidingWindowConfig) -> Result<FeatureSequence> {
    cfg.validate()?;
    if line.width() == 0 {
        return Err(Error::Argument("line has no columns".into()));
    }
    if line.height() < cfg.grid_rows {
        return Err(Error::Argument(format!(
            "line height {} below grid rows {}",
            line.height(),
            cfg.grid_rows
        )));
    }
    let positions = window_positions(line.width(), cfg.window_width, cfg.stride());
    let mut frames = Array2::zeros((positions.len(), cfg.dimension()));
    for (t, &x0) in positions.iter().enumerate() {
        let patch = window_patch(line, x0, cfg.window_width)?;
        let v = lgh_window(&patch, cfg)?;
        frames.row_mut(t).assign(&ArrayView1::from(&v[..]));
    }
    Ok(FeatureSequence { frames, positions, window: cfg.window_width, config_digest: cfg.digest() })
}

/// Median length of vertical foreground runs, or `None` without ink.
pub fn estimate_line_thickness(mask: &BinaryImage) -> Option<f64> {
    let mut runs = Vec::new();
    for x in 0..mask.width() {
        let mut run = 0usize;
        for y in 0..mask.height() {
            if mask.get(x, y) {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        if run > 0 {
            runs.push(run);
        }
    }
    if runs.is_empty() {
        return None;
    }
    runs.sort_unstable();
    let n = runs.len();
    Some(if n % 2 == 1 {
        runs[n / 2] as f64
    } else {
        (runs[n / 2 - 1] + runs[n / 2]) as f64 / 2.0
    })
}

/// Per-frame flags; `true` marks a silence frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilenceMask(pub Vec<bool>);

impl SilenceMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn silent_count(&self) -> usize {
        self.0.iter().filter(|&&s| s).count()
    }

    /// Complement: frames kept for writer scoring.
    pub fn keep(&self) -> Vec<bool> {
        self.0.iter().map(|s| !s).collect()
    }
}

/// A frame is silence when no column of its window holds more ink than
/// `ceil(staff_lines × t̂)`, with t̂ the median vertical run length.
pub fn detect_silence(line: &BinaryImage, seq: &FeatureSequence, staff_lines: usize) -> SilenceMask {
    let Some(thickness) = estimate_line_thickness(line) else {
        return SilenceMask(vec![true; seq.len()]);
    };
    let budget = (staff_lines as f64 * thickness).ceil() as usize;
    let mut heavy = vec![false; line.width()];
    for x in 0..line.width() {
        let count = (0..line.height()).filter(|&y| line.get(x, y)).count();
        heavy[x] = count > budget;
    }
    let window = seq.window.max(1);
    SilenceMask(
        seq.positions
            .iter()
            .map(|&p| !heavy[p.min(heavy.len())..(p + window).min(heavy.len())].iter().any(|&h| h))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborConfig {
    pub wavelength: f64,
    /// σ as a multiple of the wavelength.
    pub sigma_ratio: f64,
    pub gamma: f64,
    pub phase: f64,
    pub bands: usize,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self::from_line_thickness(2.0)
    }
}

impl GaborConfig {
    pub const ORIENTATIONS_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];

    /// Wavelength 8 × staff-line thickness, σ = 0.56λ, γ = 0.5, φ = 0.
    pub fn from_line_thickness(thickness: f64) -> Self {
        Self { wavelength: 8.0 * thickness, sigma_ratio: 0.56, gamma: 0.5, phase: 0.0, bands: 12 }
    }

    pub fn dimension(&self) -> usize {
        self.bands * Self::ORIENTATIONS_DEG.len()
    }
}

/// Zero-mean Gabor kernel, `(2r+1)²` taps, row-major.
pub fn gabor_kernel(cfg: &GaborConfig, theta: f64) -> (usize, Vec<f64>) {
    let sigma = cfg.sigma_ratio * cfg.wavelength;
    let r = (3.0 * sigma).ceil().max(1.0) as i64;
    let (s, c) = theta.sin_cos();
    let mut k = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            let xp = x * c + y * s;
            let yp = -x * s + y * c;
            let env = (-(xp * xp + cfg.gamma * cfg.gamma * yp * yp) / (2.0 * sigma * sigma)).exp();
            k.push(env * (TAU * xp / cfg.wavelength + cfg.phase).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    (r as usize, k)
}

/// Mean Gabor magnitude per horizontal band and orientation, band-major.
pub fn gabor_features(window: &GrayImage, cfg: &GaborConfig) -> Result<Vec<f64>> {
    let (w, h) = (window.width(), window.height());
    if h < cfg.bands || cfg.bands == 0 {
        return Err(Error::Argument(format!("window height {h} below {} bands", cfg.bands)));
    }
    let n_or = GaborConfig::ORIENTATIONS_DEG.len();
    let mut out = vec![0.0; cfg.bands * n_or];
    let mut band_px = vec![0usize; cfg.bands];
    for y in 0..h {
        band_px[y * cfg.bands / h] += w;
    }
    for (o, deg) in GaborConfig::ORIENTATIONS_DEG.iter().enumerate() {
        let (r, kernel) = gabor_kernel(cfg, deg.to_radians());
        let side = 2 * r + 1;
        for y in 0..h {
            let band = y * cfg.bands / h;
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..side {
                    let sy = (y as i64 + ky as i64 - r as i64).clamp(0, h as i64 - 1) as usize;
                    let row = window.row(sy);
                    let krow = &kernel[ky * side..(ky + 1) * side];
                    for (kx, kv) in krow.iter().enumerate() {
                        let sx = (x as i64 + kx as i64 - r as i64).clamp(0, w as i64 - 1) as usize;
                        acc += kv * f64::from(row[sx]);
                    }
                }
                out[band * n_or + o] += acc.abs();
            }
        }
    }
    for band in 0..cfg.bands {
        for o in 0..n_or {
            out[band * n_or + o] /= band_px[band] as f64;
        }
    }
    Ok(out)
}

/// Gabor descriptors over the same window grid as [`sliding_lgh`].
pub fn sliding_gabor(line: &GrayImage, win: &SlidingWindowConfig, cfg: &GaborConfig) -> Result<FeatureSequence> {
    win.validate()?;
    if line.width() == 0 {
        return Err(Error::Argument("line has no columns".into()));
    }
    let positions = window_positions(line.width(), win.window_width, win.stride());
    let mut frames = Array2::zeros((positions.len(), cfg.dimension()));
    for (t, &x0) in positions.iter().enumerate() {
        let patch = window_patch(line, x0, win.window_width)?;
        let v = gabor_features(&patch, cfg)?;
        frames.row_mut(t).assign(&ArrayView1::from(&v[..]));
    }
    #[derive(Serialize)]
    struct Key<'a> {
        window: &'a SlidingWindowConfig,
        gabor: &'a GaborConfig,
    }
    let digest = config_digest(&Key { window: win, gabor: cfg });
    Ok(FeatureSequence { frames, positions, window: win.window_width, config_digest: digest })
}

/// Window starting at column `x0`, padded with background past the line end.
fn window_patch(line: &GrayImage, x0: usize, window: usize) -> Result<GrayImage> {
    let w = window.min(line.width() - x0);
    let patch = line.crop(x0, 0, w, line.height())?;
    Ok(if w < window { pad_to_width(&patch, window) } else { patch })
}

/// Line image padded on the right with background to at least `width`.
pub fn pad_to_width(img: &GrayImage, width: usize) -> GrayImage {
    if img.width() >= width {
        return img.clone();
    }
    GrayImage::from_fn(width, img.height(), |x, y| {
        if x < img.width() {
            img.get(x, y)
        } else {
            BACKGROUND
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg8() -> SlidingWindowConfig {
        SlidingWindowConfig { orientation_bins: 8, ..Default::default() }
    }

    #[test]
    fn positions_follow_stride_and_clamp_rule() {
        assert_eq!(window_positions(100, 34, 17), vec![0, 17, 34, 51, 68]);
        assert_eq!(window_positions(34, 34, 17), vec![0]);
        assert_eq!(window_positions(68, 34, 17), vec![0, 17, 34]);
        assert_eq!(window_positions(20, 34, 17), vec![0]);
        assert!(window_positions(0, 34, 17).is_empty());
    }

    #[test]
    fn gradient_of_ramp_and_constant() {
        let ramp = GrayImage::from_fn(6, 5, |x, _| (x * 10) as u8);
        let g = gradient(&ramp).unwrap();
        for y in 0..5 {
            for x in 1..5 {
                assert_eq!(g.gx[y * 6 + x], 20.0);
                assert_eq!(g.gy[y * 6 + x], 0.0);
            }
        }
        let flat = gradient(&GrayImage::filled(4, 4, 77)).unwrap();
        assert!(flat.gx.iter().chain(&flat.gy).all(|&v| v == 0.0));
        assert!(gradient(&GrayImage::filled(2, 5, 0)).is_err());
    }

    #[test]
    fn lgh_dimensions_and_constant_patch() {
        let patch = GrayImage::filled(34, 40, 200);
        assert_eq!(lgh_window(&patch, &cfg8()).unwrap(), vec![0.0; 128]);
        assert_eq!(cfg8().dimension(), 128);
        assert_eq!(SlidingWindowConfig::default().dimension(), 256);
    }

    #[test]
    fn orientation_bins_axis_aligned() {
        assert_eq!(orientation_bin(1.0, 0.0, 8), 0);
        assert_eq!(orientation_bin(0.0, 1.0, 8), 2);
        assert_eq!(orientation_bin(-1.0, 0.0, 8), 4);
        assert_eq!(orientation_bin(0.0, -1.0, 8), 6);
        assert_eq!(orientation_bin(1.0, -0.01, 8), 7);
    }

    #[test]
    fn narrow_line_is_padded_to_one_window() {
        let line = GrayImage::from_fn(20, 30, |x, _| if x == 10 { 0 } else { 255 });
        let seq = sliding_lgh(&line, &cfg8()).unwrap();
        assert_eq!(seq.len(), 1);
        let padded = sliding_lgh(&pad_to_width(&line, 34), &cfg8()).unwrap();
        assert_eq!(seq.frames, padded.frames);
        let one = sliding_lgh(&GrayImage::filled(34, 30, 255), &cfg8()).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn silence_on_staff_only_window() {
        // five one-pixel staff lines
        let img = GrayImage::from_fn(40, 30, |_, y| if y % 5 == 2 && y < 25 { 0 } else { 255 });
        let mask = crate::imgproc::binarize(&img);
        let seq = sliding_lgh(&img, &cfg8()).unwrap();
        let s = detect_silence(&mask, &seq, 5);
        assert!(s.0.iter().all(|&b| b));

        let blank = BinaryImage::empty(40, 30);
        let seq = sliding_lgh(&GrayImage::filled(40, 30, 255), &cfg8()).unwrap();
        assert!(detect_silence(&blank, &seq, 5).0.iter().all(|&b| b));
    }

    #[test]
    fn feature_file_round_trip() {
        let line = GrayImage::from_fn(80, 30, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let seq = sliding_lgh(&line, &cfg8()).unwrap();
        let back = FeatureSequence::from_bytes(&seq.to_bytes()).unwrap();
        assert_eq!(back.frames, seq.frames);
        let bytes = seq.to_bytes();
        assert_eq!(&bytes[..4], b"FSEQ");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, seq.len());
        assert!(FeatureSequence::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(FeatureSequence::from_bytes(b"XXXX").is_err());
    }

    #[test]
    fn gabor_dimension_and_constant_input() {
        let cfg = GaborConfig::default();
        let v = gabor_features(&GrayImage::filled(20, 36, 130), &cfg).unwrap();
        assert_eq!(v.len(), 48);
        for band in v.chunks(4) {
            for &x in band {
                assert!((x - band[0]).abs() < 1e-9);
            }
        }
        assert!(gabor_features(&GrayImage::filled(20, 10, 0), &cfg).is_err());
    }
}
