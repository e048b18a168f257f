//! Score-line extraction: projection segmentation of whole lines and
//! block-line detection in vertical strips by forced alignment.

use std::fmt::Write as _;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sliding_lgh, FeatureSequence, SlidingWindowConfig};
use crate::imgproc::{binarize, projection, split_strips, strip_bounds, Axis, BinaryImage, GrayImage};
use crate::seqmodel::{
    baum_welch, forced_align, hmm_init_flat, realign_retrain, BaumWelchConfig, FillerGrammar, ZoneAlignment,
    ZoneLabel,
};
use crate::synth::{RowInterval, SynthGroundTruth};

/// Where a box was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxSource {
    Page,
    /// Strip index and its column range `[start, end)`.
    Strip { index: usize, start: usize, end: usize },
}

/// Inclusive row span of a detected score-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineBox {
    pub top: usize,
    pub bottom: usize,
    pub source: BoxSource,
}

impl LineBox {
    pub fn height(&self) -> usize {
        self.bottom + 1 - self.top
    }

    /// Column range of the box within a page of width `page_width`.
    pub fn columns(&self, page_width: usize) -> (usize, usize) {
        match self.source {
            BoxSource::Page => (0, page_width),
            BoxSource::Strip { start, end, .. } => (start, end),
        }
    }

    /// Cuts the box out of the page it was detected on.
    pub fn crop(&self, page: &GrayImage) -> Result<GrayImage> {
        let (x0, x1) = self.columns(page.width());
        page.crop(x0, self.top, x1 - x0, self.height())
    }

    pub fn contains(&self, other: &RowInterval) -> bool {
        self.top <= other.top && other.bottom <= self.bottom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    /// Relative threshold θ on the smoothed profile.
    pub threshold: f64,
    /// Runs separated by fewer blank rows than this are merged.
    pub min_gap: usize,
    /// Moving-average width as a fraction of the estimated staff height.
    pub smoothing: f64,
    pub staff_lines: usize,
    /// Boxes shorter than this fraction of the staff height are merged into
    /// a close neighbour or dropped; 0 disables.
    pub min_height: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { threshold: 0.1, min_gap: 3, smoothing: 0.5, staff_lines: 5, min_height: 0.5 }
    }
}

fn vertical_runs(mask: &BinaryImage, ink: bool, bounded: bool) -> Vec<usize> {
    let mut runs = Vec::new();
    for x in 0..mask.width() {
        let mut run = 0usize;
        let mut seen_other = false;
        for y in 0..mask.height() {
            if mask.get(x, y) == ink {
                run += 1;
            } else {
                if run > 0 && (!bounded || seen_other) {
                    runs.push(run);
                }
                run = 0;
                seen_other = true;
            }
        }
        if run > 0 && !bounded {
            runs.push(run);
        }
    }
    runs
}

fn median(mut v: Vec<usize>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 })
}

/// Staff height from the median ink run (line thickness) and the median
/// ink-bounded blank run (space between staff lines).
pub fn estimate_staff_height(mask: &BinaryImage, staff_lines: usize) -> Option<f64> {
    let t = median(vertical_runs(mask, true, false))?;
    let g = median(vertical_runs(mask, false, true)).unwrap_or(t);
    Some(staff_lines.saturating_sub(1) as f64 * (t + g) + t)
}

fn moving_average(v: &[usize], width: usize) -> Vec<f64> {
    let n = v.len();
    let half = width / 2;
    let mut prefix = vec![0usize; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + width - half).min(n);
            (prefix[b] - prefix[a]) as f64 / (b - a) as f64
        })
        .collect()
}

fn merge_runs(runs: Vec<(usize, usize)>, min_gap: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match out.last_mut() {
            Some(last) if r.0 <= last.1 + min_gap => last.1 = last.1.max(r.1),
            _ => out.push(r),
        }
    }
    out
}

/// Whole-line segmentation from the horizontal projection profile.
pub fn segment_lines_projection(page: &GrayImage, cfg: &ProjectionConfig) -> Vec<LineBox> {
    let mask = binarize(page);
    segment_mask_projection(&mask, cfg)
}

pub fn segment_mask_projection(mask: &BinaryImage, cfg: &ProjectionConfig) -> Vec<LineBox> {
    let Some(staff_h) = estimate_staff_height(mask, cfg.staff_lines) else {
        return Vec::new();
    };
    let profile = projection(mask, Axis::Horizontal).counts;
    let width = ((cfg.smoothing * staff_h).round() as usize).max(1);
    let smooth = moving_average(&profile, width);
    let peak = smooth.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    // Measured above the emptiest row so uniform speckle does not swamp the
    // threshold; pages with a blank row get the plain θ·max rule.
    let base_row = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let level = base_row + cfg.threshold * (peak - base_row);
    let mut cores = Vec::new();
    let mut start = None;
    for (y, &v) in smooth.iter().enumerate() {
        match (v > level, start) {
            (true, None) => start = Some(y),
            (false, Some(a)) => {
                cores.push((a, y - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        cores.push((a, smooth.len() - 1));
    }
    let cores = merge_runs(cores, cfg.min_gap);

    // Background level from rows outside the cores.
    let outside: Vec<usize> = (0..profile.len())
        .filter(|&y| !cores.iter().any(|&(a, b)| a <= y && y <= b))
        .map(|y| profile[y])
        .collect();
    let base = median(outside).unwrap_or(0.0);
    let floor = base + 3.0 * base.sqrt();
    let inked = |y: usize| profile[y] as f64 > floor;

    // Grow each core through inked rows, bridging gaps shorter than
    // min_gap, without crossing the valley to its neighbours.
    let mut boxes = Vec::with_capacity(cores.len());
    for (i, &(a, b)) in cores.iter().enumerate() {
        let lo = if i == 0 { 0 } else { valley(&smooth, cores[i - 1].1, a) + 1 };
        let hi = if i + 1 == cores.len() { profile.len() - 1 } else { valley(&smooth, b, cores[i + 1].0) };
        let mut top = a;
        let mut y = a;
        while y > lo {
            let reach = (lo..y).rev().take(cfg.min_gap.max(1)).find(|&r| inked(r));
            match reach {
                Some(r) => {
                    top = r;
                    y = r;
                }
                None => break,
            }
        }
        let mut bottom = b;
        let mut y = b;
        while y < hi {
            let reach = (y + 1..=hi).take(cfg.min_gap.max(1)).find(|&r| inked(r));
            match reach {
                Some(r) => {
                    bottom = r;
                    y = r;
                }
                None => break,
            }
        }
        // Shrink to inked rows inside the core as well.
        while top < bottom && !inked(top) {
            top += 1;
        }
        while bottom > top && !inked(bottom) {
            bottom -= 1;
        }
        boxes.push((top, bottom));
    }
    let boxes = merge_runs(boxes, cfg.min_gap);
    absorb_fragments(boxes, cfg.min_height * staff_h, staff_h)
        .into_iter()
        .map(|(top, bottom)| LineBox { top, bottom, source: BoxSource::Page })
        .collect()
}

/// Boxes shorter than `min_height` cannot hold a staff. Each joins its
/// nearest neighbour when the gap is at most `reach`, and is dropped
/// otherwise. A lone box is kept.
fn absorb_fragments(mut boxes: Vec<(usize, usize)>, min_height: f64, reach: f64) -> Vec<(usize, usize)> {
    loop {
        if boxes.len() < 2 {
            return boxes;
        }
        let Some(i) = (0..boxes.len())
            .filter(|&i| ((boxes[i].1 + 1 - boxes[i].0) as f64) < min_height)
            .min_by_key(|&i| (boxes[i].1 + 1 - boxes[i].0, i))
        else {
            return boxes;
        };
        let gap_up = (i > 0).then(|| boxes[i].0 - boxes[i - 1].1);
        let gap_down = (i + 1 < boxes.len()).then(|| boxes[i + 1].0 - boxes[i].1);
        let target = match (gap_up, gap_down) {
            (Some(u), Some(d)) => if u <= d { (i - 1, u) } else { (i + 1, d) },
            (Some(u), None) => (i - 1, u),
            (None, Some(d)) => (i + 1, d),
            (None, None) => unreachable!("at least two boxes"),
        };
        let frag = boxes.remove(i);
        if target.1 as f64 <= reach {
            let j = if target.0 > i { target.0 - 1 } else { target.0 };
            boxes[j] = (boxes[j].0.min(frag.0), boxes[j].1.max(frag.1));
        }
    }
}

fn valley(smooth: &[f64], from: usize, to: usize) -> usize {
    let mut best = from;
    for y in from..=to.min(smooth.len() - 1) {
        if smooth[y] < smooth[best] {
            best = y;
        }
    }
    best
}

/// Frames scanned top to bottom: `sliding_lgh` on the strip rotated a
/// quarter turn counter-clockwise, so frame positions are row indices.
pub fn extract_strip_frames(strip: &GrayImage, cfg: &SlidingWindowConfig) -> Result<FeatureSequence> {
    if strip.height() < cfg.window_width {
        return Err(Error::Argument(format!(
            "strip height {} below window {}",
            strip.height(),
            cfg.window_width
        )));
    }
    sliding_lgh(&strip.rotate_ccw(), cfg)
}

/// Zone alignment of one strip together with its frame→row mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct StripAlignment {
    pub strip_index: usize,
    pub columns: (usize, usize),
    pub alignment: ZoneAlignment,
    /// Top row of each frame's window.
    pub positions: Vec<usize>,
    pub window: usize,
    pub height: usize,
}

impl StripAlignment {
    /// Score segments as row boxes: first frame's top row to last frame's
    /// bottom row.
    pub fn boxes(&self) -> Vec<LineBox> {
        let mut out: Vec<LineBox> = Vec::new();
        for seg in self.alignment.segments.iter().filter(|s| s.label == ZoneLabel::Score) {
            let mut top = self.positions[seg.start];
            let bottom = (self.positions[seg.end] + self.window - 1).min(self.height - 1);
            // Overlapping windows may make neighbours touch; keep boxes disjoint.
            if let Some(prev) = out.last() {
                top = top.max(prev.bottom + 1);
            }
            if top > bottom {
                continue;
            }
            out.push(LineBox {
                top,
                bottom,
                source: BoxSource::Strip { index: self.strip_index, start: self.columns.0, end: self.columns.1 },
            });
        }
        out
    }
}

pub fn align_strip(
    strip: &GrayImage,
    strip_index: usize,
    columns: (usize, usize),
    grammar: &FillerGrammar,
    cfg: &SlidingWindowConfig,
) -> Result<StripAlignment> {
    let seq = extract_strip_frames(strip, cfg)?;
    let alignment = forced_align(seq.frames.view(), grammar)?;
    Ok(StripAlignment {
        strip_index,
        columns,
        alignment,
        positions: seq.positions,
        window: seq.window,
        height: strip.height(),
    })
}

/// Block-lines of one strip. Alignment failures yield no boxes and a
/// warning.
pub fn detect_block_lines(
    strip: &GrayImage,
    strip_index: usize,
    columns: (usize, usize),
    grammar: &FillerGrammar,
    cfg: &SlidingWindowConfig,
) -> Vec<LineBox> {
    match align_strip(strip, strip_index, columns, grammar, cfg) {
        Ok(a) => a.boxes(),
        Err(e) => {
            log::warn!("strip {strip_index}: no block-lines ({e})");
            Vec::new()
        }
    }
}

/// Splits the page into `n_strips` vertical strips and detects block-lines
/// in each, in parallel; output ordered by strip then row.
pub fn segment_page_blocks(
    page: &GrayImage,
    n_strips: usize,
    grammar: &FillerGrammar,
    cfg: &SlidingWindowConfig,
) -> Result<Vec<LineBox>> {
    let bounds = strip_bounds(page.width(), n_strips)?;
    let strips = split_strips(page, n_strips)?;
    let per_strip: Vec<Vec<LineBox>> = strips
        .par_iter()
        .zip(bounds.par_iter())
        .enumerate()
        .map(|(i, (strip, &cols))| detect_block_lines(strip, i, cols, grammar, cfg))
        .collect();
    Ok(per_strip.into_iter().flatten().collect())
}

/// Text records: `strip <i> score <top> <bottom>` for block-lines and
/// `page score <top> <bottom>` for whole lines.
pub fn format_boxes(boxes: &[LineBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let _ = match b.source {
            BoxSource::Page => writeln!(out, "page score {} {}", b.top, b.bottom),
            BoxSource::Strip { index, .. } => writeln!(out, "strip {index} score {} {}", b.top, b.bottom),
        };
    }
    out
}

/// Ground-truth row boxes per strip of a page.
#[derive(Debug, Clone)]
pub struct AnnotatedPage {
    pub image: GrayImage,
    pub strip_boxes: Vec<Vec<RowInterval>>,
}

impl AnnotatedPage {
    /// Per-strip boxes from the ink actually present in each strip.
    pub fn from_synth(image: GrayImage, truth: &SynthGroundTruth, n_strips: usize) -> Result<Self> {
        let bounds = strip_bounds(image.width(), n_strips)?;
        let strip_boxes = bounds.iter().map(|&(a, b)| truth.boxes_in_columns(a, b)).collect();
        Ok(Self { image, strip_boxes })
    }

    /// The same boxes for every strip (straight lines spanning the page).
    pub fn from_line_boxes(image: GrayImage, boxes: &[RowInterval], n_strips: usize) -> Result<Self> {
        strip_bounds(image.width(), n_strips)?;
        Ok(Self { image, strip_boxes: vec![boxes.to_vec(); n_strips] })
    }
}

/// One strip's frames with per-frame zone labels.
#[derive(Debug, Clone)]
pub struct LabelledStrip {
    pub frames: Array2<f64>,
    pub labels: Vec<ZoneLabel>,
    pub positions: Vec<usize>,
    /// Number of ground-truth boxes intersecting the strip.
    pub zones: usize,
}

impl LabelledStrip {
    /// Maximal runs of equal labels as `(label, start, end)` (end inclusive).
    pub fn runs(&self) -> Vec<(ZoneLabel, usize, usize)> {
        let mut out: Vec<(ZoneLabel, usize, usize)> = Vec::new();
        for (t, &l) in self.labels.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == l => last.2 = t,
                _ => out.push((l, t, t)),
            }
        }
        out
    }
}

/// Label of a window covering rows `[top, top + window)`: Score when at
/// least half of its rows fall inside ground-truth boxes.
pub fn frame_label(top: usize, window: usize, boxes: &[RowInterval]) -> ZoneLabel {
    let end = top + window;
    let covered: usize = boxes
        .iter()
        .map(|b| {
            let a = b.top.max(top);
            let z = (b.bottom + 1).min(end);
            z.saturating_sub(a)
        })
        .sum();
    if 2 * covered >= window {
        ZoneLabel::Score
    } else {
        ZoneLabel::WithoutScore
    }
}

pub fn zone_training_set(pages: &[AnnotatedPage], n_strips: usize, cfg: &SlidingWindowConfig) -> Result<Vec<LabelledStrip>> {
    let jobs: Vec<(usize, usize)> = (0..pages.len()).flat_map(|p| (0..n_strips).map(move |s| (p, s))).collect();
    let strips: Vec<Vec<GrayImage>> = pages
        .iter()
        .map(|p| split_strips(&p.image, n_strips))
        .collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|&(p, s)| {
            let boxes = pages[p].strip_boxes.get(s).map(Vec::as_slice).unwrap_or(&[]);
            let seq = extract_strip_frames(&strips[p][s], cfg)?;
            let labels = seq.positions.iter().map(|&y| frame_label(y, seq.window, boxes)).collect();
            Ok(LabelledStrip { frames: seq.frames, labels, positions: seq.positions, zones: boxes.len() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrammarConfig {
    pub states: usize,
    pub mixtures: usize,
    pub iterations: usize,
    pub realign_rounds: usize,
    pub switch_prob: f64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self { states: 3, mixtures: 4, iterations: 5, realign_rounds: 2, switch_prob: FillerGrammar::DEFAULT_SWITCH_PROB }
    }
}

/// Trains both zone models on the labelled runs, then refines them by
/// realignment.
pub fn train_filler_grammar(set: &[LabelledStrip], cfg: &GrammarConfig) -> Result<FillerGrammar> {
    let mut models = Vec::with_capacity(2);
    for label in ZoneLabel::ALL {
        let segs: Vec<ArrayView2<'_, f64>> = set
            .iter()
            .flat_map(|st| {
                st.runs()
                    .into_iter()
                    .filter(move |r| r.0 == label && r.2 + 1 - r.1 >= cfg.states)
                    .map(move |r| st.frames.slice(s![r.1..=r.2, ..]))
            })
            .collect();
        if segs.is_empty() {
            return Err(Error::Training(format!(
                "no {label:?} zone of at least {} frames in the training strips",
                cfg.states
            )));
        }
        let init = hmm_init_flat(&segs, cfg.states)?;
        let bw = BaumWelchConfig {
            iterations: cfg.iterations,
            mixture_target: cfg.mixtures,
            iterations_per_split: cfg.iterations.max(1),
        };
        models.push(baum_welch(&segs, &init, &bw)?.0);
    }
    let score = models.pop().expect("two labels");
    let without = models.pop().expect("two labels");
    let grammar = FillerGrammar::with_switch_prob(without, score, cfg.switch_prob)?;
    if cfg.realign_rounds == 0 {
        return Ok(grammar);
    }
    let views: Vec<ArrayView2<'_, f64>> = set.iter().map(|s| s.frames.view()).collect();
    Ok(realign_retrain(&views, &grammar, cfg.realign_rounds, cfg.iterations)?.grammar)
}
