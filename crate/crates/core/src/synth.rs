//! Ground-truthed synthetic score pages and degradation models.
//!
//! Pages are rendered without anti-aliasing so the ink mask is exact. Each
//! writer is a [`WriterStyle`] drawn from a style seed; the page seed only
//! controls content (pitches, rhythm, spacing).

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{BinaryImage, GrayImage, BACKGROUND};

/// Preset degradation levels (10%, 20%, 30%).
pub const NOISE_PRESETS: [f64; 3] = [0.10, 0.20, 0.30];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthPageSpec {
    pub style_seed: u64,
    pub width: usize,
    pub height: usize,
    pub lines_per_page: usize,
    pub staff_lines: usize,
    /// Distance between adjacent staff-line tops.
    pub staff_gap: usize,
    pub staff_thickness: usize,
    /// Expected symbols per 100 px of staff.
    pub symbol_density: f64,
    /// Pen width for symbols; 0 lets the writer style decide.
    pub stroke_thickness: usize,
    pub curvature_amplitude: f64,
    pub curvature_period: f64,
    pub margin: usize,
}

impl Default for SynthPageSpec {
    fn default() -> Self {
        Self {
            style_seed: 0,
            width: 800,
            height: 620,
            lines_per_page: 3,
            staff_lines: 5,
            staff_gap: 12,
            staff_thickness: 2,
            symbol_density: 3.0,
            stroke_thickness: 0,
            curvature_amplitude: 0.0,
            curvature_period: 400.0,
            margin: 24,
        }
    }
}

impl SynthPageSpec {
    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Argument("page dimensions must be positive".into()));
        }
        if self.curvature_amplitude < 0.0 || !self.curvature_amplitude.is_finite() {
            return Err(Error::Argument("curvature amplitude must be finite and >= 0".into()));
        }
        if self.curvature_amplitude > 0.0 && self.curvature_period <= 0.0 {
            return Err(Error::Argument("curvature period must be positive".into()));
        }
        if self.symbol_density < 0.0 || !self.symbol_density.is_finite() {
            return Err(Error::Argument("symbol density must be finite and >= 0".into()));
        }
        if self.lines_per_page > 0 && (self.staff_lines == 0 || self.staff_gap < 4 || self.staff_thickness == 0) {
            return Err(Error::Argument(
                "staff needs at least one line, gap >= 4 and thickness >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Rows from the top of a score-line slot to its first staff line.
    fn slot_pad(&self) -> usize {
        5 * self.staff_gap
    }

    fn staff_height(&self) -> usize {
        (self.staff_lines.max(1) - 1) * self.staff_gap + self.staff_thickness
    }

    fn slot_height(&self) -> usize {
        self.staff_height() + 2 * self.slot_pad()
    }

    /// Smallest page height that fits the layout with `spacing` blank rows
    /// between slots.
    pub fn required_height(&self, spacing: usize) -> usize {
        if self.lines_per_page == 0 {
            return 1;
        }
        let amp = self.curvature_amplitude.ceil() as usize;
        2 * self.margin + 2 * amp + self.lines_per_page * self.slot_height()
            + (self.lines_per_page - 1) * spacing
    }
}

/// Writer-specific drawing habits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterStyle {
    /// Stem lean in radians; positive leans the top of an up-stem to the right.
    pub slant: f64,
    /// Note-head half-width in staff gaps.
    pub head_rx: f64,
    /// Note-head half-height in staff gaps.
    pub head_ry: f64,
    pub head_tilt: f64,
    /// Stem length in staff gaps.
    pub stem_len: f64,
    pub hollow_prob: f64,
    pub beam_prob: f64,
    pub rest_prob: f64,
    pub pen: usize,
    /// Multiplier on horizontal spacing between symbols.
    pub spacing: f64,
    pub ink: u8,
}

impl WriterStyle {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4c45_5354_594c);
        Self {
            slant: rng.random_range(-0.35..0.35),
            head_rx: rng.random_range(0.55..1.0),
            head_ry: rng.random_range(0.5..0.68),
            head_tilt: rng.random_range(-0.7..0.7),
            stem_len: rng.random_range(2.6..4.0),
            hollow_prob: rng.random_range(0.0..0.6),
            beam_prob: rng.random_range(0.1..0.7),
            rest_prob: rng.random_range(0.0..0.25),
            pen: rng.random_range(1..=3),
            spacing: rng.random_range(0.8..1.3),
            ink: rng.random_range(10..70),
        }
    }
}

/// Row span of one score-line, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowInterval {
    pub top: usize,
    pub bottom: usize,
}

/// Column span, half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInterval {
    pub start: usize,
    pub end: usize,
}

impl ColumnInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains_span(&self, start: usize, end: usize) -> bool {
        self.start <= start && end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGroundTruth {
    pub line_boxes: Vec<RowInterval>,
    /// Per line: columns without symbol ink (staff lines only or blank).
    pub silence: Vec<Vec<ColumnInterval>>,
    /// Per line: maximal column runs containing symbol ink.
    pub symbols: Vec<Vec<ColumnInterval>>,
    pub ink_mask: BinaryImage,
    pub staff_mask: BinaryImage,
    /// Per pixel, 1-based score-line index of the ink there (0 = no ink).
    pub line_labels: Vec<u16>,
}

impl SynthGroundTruth {
    /// Row extent of each score-line's ink restricted to columns `[x0, x1)`.
    /// Lines with no ink in the range are omitted.
    pub fn boxes_in_columns(&self, x0: usize, x1: usize) -> Vec<RowInterval> {
        let w = self.ink_mask.width();
        let h = self.ink_mask.height();
        let mut spans: Vec<Option<(usize, usize)>> = vec![None; self.line_boxes.len()];
        for y in 0..h {
            for x in x0..x1.min(w) {
                let l = self.line_labels[y * w + x];
                if l == 0 {
                    continue;
                }
                let s = &mut spans[l as usize - 1];
                *s = Some(match *s {
                    None => (y, y),
                    Some((a, _)) => (a, y),
                });
            }
        }
        spans
            .into_iter()
            .flatten()
            .map(|(top, bottom)| RowInterval { top, bottom })
            .collect()
    }

    /// Line-oriented sidecar: one `line` record per score-line.
    ///
    /// ```text
    /// line <index> rows <top> <bottom> silence <start>-<end> ...
    /// ```
    /// Column intervals are half-open.
    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        for (i, b) in self.line_boxes.iter().enumerate() {
            let _ = write!(out, "line {i} rows {} {} silence", b.top, b.bottom);
            for s in &self.silence[i] {
                let _ = write!(out, " {}-{}", s.start, s.end);
            }
            out.push('\n');
        }
        out
    }
}

/// One record parsed from a ground-truth sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarLine {
    pub rows: RowInterval,
    pub silence: Vec<ColumnInterval>,
}

pub fn parse_sidecar(text: &str) -> Result<Vec<SidecarLine>> {
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let bad = || Error::Format(format!("sidecar line {}: {raw:?}", n + 1));
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if tok.len() < 6 || tok[0] != "line" || tok[2] != "rows" || tok[5] != "silence" {
            return Err(bad());
        }
        let top: usize = tok[3].parse().map_err(|_| bad())?;
        let bottom: usize = tok[4].parse().map_err(|_| bad())?;
        if top > bottom {
            return Err(bad());
        }
        let mut silence = Vec::new();
        for t in &tok[6..] {
            let (a, b) = t.split_once('-').ok_or_else(bad)?;
            silence.push(ColumnInterval {
                start: a.parse().map_err(|_| bad())?,
                end: b.parse().map_err(|_| bad())?,
            });
        }
        lines.push(SidecarLine { rows: RowInterval { top, bottom }, silence });
    }
    Ok(lines)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cell {
    Empty,
    Staff,
    Symbol,
}

/// Rendering surface tracking ink kind and owning score-line per pixel.
struct Canvas {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    labels: Vec<u16>,
    pen: usize,
    label: u16,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![Cell::Empty; width * height],
            labels: vec![0; width * height],
            pen: 1,
            label: 0,
        }
    }

    fn put(&mut self, x: i64, y: i64, kind: Cell) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = y as usize * self.width + x as usize;
        if kind == Cell::Symbol || self.cells[i] == Cell::Empty {
            self.cells[i] = kind;
        }
        self.labels[i] = self.label;
    }

    /// Square pen stamp of side `pen` centred (to the left/up for even
    /// widths) on the point.
    fn stamp(&mut self, x: f64, y: f64) {
        let p = self.pen as i64;
        let x0 = x.round() as i64 - (p - 1) / 2;
        let y0 = y.round() as i64 - (p - 1) / 2;
        for dy in 0..p {
            for dx in 0..p {
                self.put(x0 + dx, y0 + dy, Cell::Symbol);
            }
        }
    }

    fn segment(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let steps = (len * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.stamp(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        }
    }

    fn ellipse(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, tilt: f64, hollow: bool) {
        let (s, c) = tilt.sin_cos();
        let r = rx.max(ry).ceil() as i64 + 1;
        let inner = self.pen as f64;
        for y in (cy.round() as i64 - r)..=(cy.round() as i64 + r) {
            for x in (cx.round() as i64 - r)..=(cx.round() as i64 + r) {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                let outer = (u / rx).powi(2) + (v / ry).powi(2) <= 1.0;
                if !outer {
                    continue;
                }
                if hollow {
                    let (irx, iry) = (rx - inner, ry - inner);
                    if irx > 0.5 && iry > 0.5 && (u / irx).powi(2) + (v / iry).powi(2) < 1.0 {
                        continue;
                    }
                }
                self.put(x, y, Cell::Symbol);
            }
        }
    }
}

struct LineLayout {
    /// Row of the first staff line top.
    staff_top: f64,
    gap: f64,
}

impl LineLayout {
    /// Vertical centre of staff position `k` (0 = top line, steps of half a gap).
    fn pos_y(&self, k: i32) -> f64 {
        self.staff_top + f64::from(k) * self.gap / 2.0
    }
}

fn draw_note(
    canvas: &mut Canvas,
    style: &WriterStyle,
    lay: &LineLayout,
    x: f64,
    k: i32,
    hollow: bool,
    stem_up: bool,
    stem_end: Option<f64>,
) -> (f64, f64) {
    let gap = lay.gap;
    let (rx, ry) = (style.head_rx * gap, style.head_ry * gap);
    let cy = lay.pos_y(k);
    canvas.ellipse(x, cy, rx, ry, style.head_tilt, hollow);
    let sx = if stem_up { x + rx * 0.85 } else { x - rx * 0.85 };
    let len = style.stem_len * gap;
    let ey = stem_end.unwrap_or(if stem_up { cy - len } else { cy + len });
    let ex = sx + (cy - ey) * style.slant.tan();
    canvas.segment(sx, cy, ex, ey);
    (ex, ey)
}

fn draw_line_symbols(
    canvas: &mut Canvas,
    style: &WriterStyle,
    spec: &SynthPageSpec,
    lay: &LineLayout,
    rng: &mut ChaCha8Rng,
) {
    let gap = lay.gap;
    let x_start = (spec.margin as f64) + 2.0 * gap;
    let x_end = (spec.width - spec.margin) as f64 - 2.0 * gap;
    let mean_step = if spec.symbol_density > 0.0 { 100.0 / spec.symbol_density } else { f64::INFINITY };
    let head_w = style.head_rx * gap;
    let mut x = x_start + rng.random_range(0.0..gap * 2.0);
    let last_k = (2 * (spec.staff_lines as i32 - 1)).max(0);
    while mean_step.is_finite() && x + 3.0 * gap < x_end {
        let roll: f64 = rng.random();
        if roll < 0.18 {
            // silence stretch: only staff lines
            x += rng.random_range(40.0..130.0);
            continue;
        }
        if roll < 0.18 + style.rest_prob * 0.5 {
            let cy = lay.pos_y(last_k / 2);
            let h = gap * 1.2;
            let w = gap * 0.45;
            let pts = [
                (x - w, cy - h),
                (x + w, cy - h / 3.0),
                (x - w, cy + h / 3.0),
                (x + w, cy + h),
            ];
            for win in pts.windows(2) {
                canvas.segment(win[0].0, win[0].1, win[1].0, win[1].1);
            }
            x += mean_step * style.spacing * rng.random_range(0.7..1.3) + 2.0 * w;
            continue;
        }
        if roll < 0.24 + style.rest_prob * 0.5 {
            let top = lay.staff_top;
            let bottom = lay.pos_y(last_k) + spec.staff_thickness as f64 - 1.0;
            let dx = (bottom - top) * style.slant.tan();
            canvas.segment(x + dx, top, x, bottom);
            x += mean_step * style.spacing * rng.random_range(0.5..1.0) + gap;
            continue;
        }
        let pick_k = |rng: &mut ChaCha8Rng| rng.random_range(-1..=last_k + 1);
        if rng.random_bool(style.beam_prob) {
            let n = rng.random_range(2..=4);
            let step = (mean_step * style.spacing * 0.55).clamp(2.5 * head_w + 4.0, 3.0 * gap + 8.0);
            if x + step * (n as f64 - 1.0) + 2.0 * gap >= x_end {
                break;
            }
            let ks: Vec<i32> = (0..n).map(|_| pick_k(rng)).collect();
            let mean_k = ks.iter().sum::<i32>() as f64 / n as f64;
            let up = mean_k >= last_k as f64 / 2.0;
            let len = style.stem_len * gap;
            let first_y = lay.pos_y(ks[0]) + if up { -len } else { len };
            let last_y = lay.pos_y(ks[n - 1]) + if up { -len } else { len };
            // beams run flatter than the notes; clamp ends beyond every head
            let extreme = if up {
                ks.iter().map(|&k| lay.pos_y(k) - len).fold(f64::INFINITY, f64::min)
            } else {
                ks.iter().map(|&k| lay.pos_y(k) + len).fold(f64::NEG_INFINITY, f64::max)
            };
            let tilt = (last_y - first_y) * 0.3;
            let mut ends = Vec::with_capacity(n);
            for (i, &k) in ks.iter().enumerate() {
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                let ey = extreme + tilt * (t - 0.5);
                let hx = x + step * i as f64;
                ends.push(draw_note(canvas, style, lay, hx, k, false, up, Some(ey)));
            }
            let beam_h = (gap * 0.4).round().max(2.0) as usize;
            let first = ends[0];
            let last = ends[n - 1];
            for b in 0..beam_h {
                let off = if up { b as f64 } else { -(b as f64) };
                canvas.segment(first.0, first.1 + off, last.0, last.1 + off);
            }
            x += step * (n as f64 - 1.0) + mean_step * style.spacing * rng.random_range(0.7..1.3);
        } else {
            let k = pick_k(rng);
            let hollow = rng.random_bool(style.hollow_prob);
            let up = k >= last_k / 2;
            draw_note(canvas, style, lay, x, k, hollow, up, None);
            x += mean_step * style.spacing * rng.random_range(0.7..1.3) + head_w;
        }
    }
}

fn column_runs(flags: &[bool]) -> Vec<ColumnInterval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(ColumnInterval { start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(ColumnInterval { start: s, end: flags.len() });
    }
    out
}

/// Vertical offset applied to column `x` by the sinusoidal warp.
pub fn curvature_shift(x: usize, amplitude: f64, period: f64) -> i64 {
    (amplitude * (TAU * x as f64 / period).sin()).round() as i64
}

fn warp_columns<T: Copy>(data: &[T], width: usize, height: usize, fill: T, amplitude: f64, period: f64) -> Vec<T> {
    let mut out = vec![fill; data.len()];
    for x in 0..width {
        let shift = curvature_shift(x, amplitude, period);
        for y in 0..height {
            let src = y as i64 - shift;
            if src >= 0 && (src as usize) < height {
                out[y * width + x] = data[src as usize * width + x];
            }
        }
    }
    out
}

/// Renders a page for `spec` using `seed` for content.
pub fn generate_page(spec: &SynthPageSpec, seed: u64) -> Result<(GrayImage, SynthGroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut canvas = Canvas::new(w, h);
    let style = WriterStyle::from_seed(spec.style_seed);
    let n = spec.lines_per_page;
    if n > 0 {
        let min_spacing = 2 * spec.staff_gap + 2 * spec.curvature_amplitude.ceil() as usize + 1;
        let need = spec.required_height(min_spacing);
        if need > h || 2 * spec.margin + 6 * spec.staff_gap >= w {
            return Err(Error::Layout(format!(
                "{n} score-lines need at least {need} rows and more than {} columns; page is {w}x{h}",
                2 * spec.margin + 6 * spec.staff_gap
            )));
        }
        let amp = spec.curvature_amplitude.ceil() as usize;
        let spacing = if n > 1 {
            (h - (need - (n - 1) * min_spacing)) / (n - 1)
        } else {
            0
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slot_h = spec.slot_height();
        let used = n * slot_h + (n - 1) * spacing;
        let top0 = if n > 1 { spec.margin + amp } else { (h - used) / 2 };
        canvas.pen = if spec.stroke_thickness > 0 { spec.stroke_thickness } else { style.pen };
        for line in 0..n {
            canvas.label = line as u16 + 1;
            let slot_top = top0 + line * (slot_h + spacing);
            let staff_top = slot_top + spec.slot_pad();
            for l in 0..spec.staff_lines {
                let y0 = staff_top + l * spec.staff_gap;
                for y in y0..y0 + spec.staff_thickness {
                    for x in spec.margin..w - spec.margin {
                        canvas.put(x as i64, y as i64, Cell::Staff);
                    }
                }
            }
            let lay = LineLayout {
                staff_top: staff_top as f64 + (spec.staff_thickness as f64 - 1.0) / 2.0,
                gap: spec.staff_gap as f64,
            };
            draw_line_symbols(&mut canvas, &style, spec, &lay, &mut rng);
        }
    }

    let (cells, labels) = if spec.curvature_amplitude > 0.0 {
        (
            warp_columns(&canvas.cells, w, h, Cell::Empty, spec.curvature_amplitude, spec.curvature_period),
            warp_columns(&canvas.labels, w, h, 0, spec.curvature_amplitude, spec.curvature_period),
        )
    } else {
        (canvas.cells, canvas.labels)
    };

    let ink = style.ink;
    let data: Vec<u8> = cells.iter().map(|c| if *c == Cell::Empty { BACKGROUND } else { ink }).collect();
    let ink_mask = BinaryImage::new(w, h, cells.iter().map(|c| *c != Cell::Empty).collect())?;
    let staff_mask = BinaryImage::new(w, h, cells.iter().map(|c| *c == Cell::Staff).collect())?;

    let mut line_boxes = Vec::with_capacity(n);
    let mut silence = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    for line in 0..n {
        let label = line as u16 + 1;
        let mut top = usize::MAX;
        let mut bottom = 0;
        let mut sym_cols = vec![false; w];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if labels[i] != label || cells[i] == Cell::Empty {
                    continue;
                }
                top = top.min(y);
                bottom = bottom.max(y);
                if cells[i] == Cell::Symbol {
                    sym_cols[x] = true;
                }
            }
        }
        if top == usize::MAX {
            return Err(Error::Layout(format!("score-line {line} rendered no ink")));
        }
        line_boxes.push(RowInterval { top, bottom });
        let quiet: Vec<bool> = sym_cols.iter().map(|s| !s).collect();
        silence.push(column_runs(&quiet));
        symbols.push(column_runs(&sym_cols));
    }

    let truth = SynthGroundTruth { line_boxes, silence, symbols, ink_mask, staff_mask, line_labels: labels };
    Ok((GrayImage::new(w, h, data)?, truth))
}

/// Adds i.i.d. Gaussian noise with σ = `level`·255, then clamps to [0, 255].
pub fn add_gaussian_noise(img: &GrayImage, level: f64, seed: u64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Argument(format!("noise level {level} outside [0, 1]")));
    }
    if level == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, level * 255.0)
        .map_err(|e| Error::Argument(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Shifts column `x` down by `round(amplitude·sin(2πx/period))` rows;
/// uncovered rows become background.
pub fn apply_curvature(img: &GrayImage, amplitude: f64, period: f64) -> Result<GrayImage> {
    if !(period > 0.0) {
        return Err(Error::Argument(format!("curvature period {period} must be positive")));
    }
    if amplitude == 0.0 {
        return Ok(img.clone());
    }
    let data = warp_columns(img.data(), img.width(), img.height(), BACKGROUND, amplitude, period);
    GrayImage::new(img.width(), img.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lines_gives_blank_page() {
        let spec = SynthPageSpec { lines_per_page: 0, ..Default::default() };
        let (img, gt) = generate_page(&spec, 1).unwrap();
        assert!(img.data().iter().all(|&v| v == BACKGROUND));
        assert!(gt.line_boxes.is_empty());
        assert_eq!(gt.ink_mask.count(), 0);
    }

    #[test]
    fn straight_lines_are_separated_by_blank_rows() {
        let spec = SynthPageSpec { lines_per_page: 2, ..Default::default() };
        let (img, gt) = generate_page(&spec, 3).unwrap();
        assert_eq!(gt.line_boxes.len(), 2);
        let (a, b) = (gt.line_boxes[0], gt.line_boxes[1]);
        assert!(a.bottom + 1 < b.top);
        for y in a.bottom + 1..b.top {
            assert!(img.row(y).iter().all(|&v| v == BACKGROUND), "row {y} not blank");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthPageSpec { style_seed: 9, ..Default::default() };
        let (a, ga) = generate_page(&spec, 42).unwrap();
        let (b, gb) = generate_page(&spec, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate_page(&spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn layout_error_when_page_too_small() {
        let spec = SynthPageSpec { lines_per_page: 10, height: 300, ..Default::default() };
        assert!(matches!(generate_page(&spec, 0), Err(Error::Layout(_))));
    }

    #[test]
    fn silence_columns_hold_only_staff_ink() {
        let spec = SynthPageSpec { style_seed: 4, ..Default::default() };
        let (_, gt) = generate_page(&spec, 11).unwrap();
        let w = spec.width;
        for (line, ivs) in gt.silence.iter().enumerate() {
            assert!(!ivs.is_empty());
            for iv in ivs {
                assert!(iv.end <= w);
                for x in iv.start..iv.end {
                    for y in 0..spec.height {
                        let i = y * w + x;
                        if gt.line_labels[i] == line as u16 + 1 && gt.ink_mask.get(x, y) {
                            assert!(gt.staff_mask.get(x, y));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn noise_level_zero_is_identity_and_range_checked() {
        let img = GrayImage::from_fn(6, 6, |x, y| (x * 40 + y) as u8);
        assert_eq!(add_gaussian_noise(&img, 0.0, 5).unwrap(), img);
        assert!(add_gaussian_noise(&img, 1.5, 5).is_err());
        assert!(add_gaussian_noise(&img, -0.1, 5).is_err());
    }

    #[test]
    fn curvature_traces_sinusoid() {
        let img = GrayImage::from_fn(120, 60, |_, y| if y == 30 { 0 } else { 255 });
        let (a, p) = (6.0, 60.0);
        let warped = apply_curvature(&img, a, p).unwrap();
        for x in 0..120 {
            let expect = 30.0 + a * (TAU * x as f64 / p).sin();
            let ys: Vec<usize> = (0..60).filter(|&y| warped.get(x, y) == 0).collect();
            assert_eq!(ys.len(), 1);
            assert!((ys[0] as f64 - expect).abs() <= 0.5 + 1e-9);
        }
        assert_eq!(apply_curvature(&img, 0.0, 10.0).unwrap(), img);
        assert!(apply_curvature(&img, 1.0, 0.0).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let spec = SynthPageSpec { style_seed: 2, ..Default::default() };
        let (_, gt) = generate_page(&spec, 8).unwrap();
        let parsed = parse_sidecar(&gt.to_sidecar()).unwrap();
        assert_eq!(parsed.len(), gt.line_boxes.len());
        for (p, (b, s)) in parsed.iter().zip(gt.line_boxes.iter().zip(&gt.silence)) {
            assert_eq!(&p.rows, b);
            assert_eq!(&p.silence, s);
        }
        assert!(parse_sidecar("line 0 rows 5 2 silence").is_err());
        assert!(parse_sidecar("bogus").is_err());
    }
}
