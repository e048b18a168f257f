//! Writer models: training, line scoring, rank weighting and page-level
//! fusion.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digest::config_digest;
use crate::dimred::{fa_fit, lda_fit, pca_fit, Transform, TransformKind};
use crate::error::{Error, Result};
use crate::features::{detect_silence, sliding_lgh, SlidingWindowConfig};
use crate::imgproc::{binarize, GrayImage};
use crate::segmentation::{
    segment_lines_projection, segment_page_blocks, train_filler_grammar, zone_training_set, AnnotatedPage,
    GrammarConfig, LineBox, ProjectionConfig,
};
use crate::seqmodel::{baum_welch, hmm_init_flat, viterbi_loglik, BaumWelchConfig, FillerGrammar, HmmParams};
use crate::synth::RowInterval;

// ---------------------------------------------------------------------------
// Weighting and fusion

/// Rank weight functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    Uniform { k: f64 },
    InvertedDistance,
    InvertedDistanceSquared,
    ExponentialDecay { a: f64 },
}

impl WeightFunction {
    pub const UNIFORM: WeightFunction = WeightFunction::Uniform { k: 1.0 };
    pub const EXPONENTIAL: WeightFunction = WeightFunction::ExponentialDecay { a: 0.5 };

    /// The four functions with default constants.
    pub fn all() -> [WeightFunction; 4] {
        [
            WeightFunction::UNIFORM,
            WeightFunction::InvertedDistance,
            WeightFunction::InvertedDistanceSquared,
            WeightFunction::EXPONENTIAL,
        ]
    }
}

impl Default for WeightFunction {
    fn default() -> Self {
        WeightFunction::InvertedDistance
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Uniform { k } => write!(f, "uniform:{k}"),
            WeightFunction::InvertedDistance => write!(f, "inverted"),
            WeightFunction::InvertedDistanceSquared => write!(f, "inverted-squared"),
            WeightFunction::ExponentialDecay { a } => write!(f, "exp:{a}"),
        }
    }
}

impl FromStr for WeightFunction {
    type Err = Error;

    /// `uniform[:K]`, `inverted`, `inverted-squared`, `exp[:a]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| Error::Argument(format!("bad weight constant {a:?}"))),
            }
        };
        match name {
            "uniform" => Ok(WeightFunction::Uniform { k: num(1.0)? }),
            "inverted" if arg.is_none() => Ok(WeightFunction::InvertedDistance),
            "inverted-squared" if arg.is_none() => Ok(WeightFunction::InvertedDistanceSquared),
            "exp" => Ok(WeightFunction::ExponentialDecay { a: num(0.5)? }),
            _ => Err(Error::Argument(format!("unknown weight function {s:?}"))),
        }
    }
}

/// Weight of rank `n` (1 = best) among `n_writers`.
pub fn weight(rank: usize, n_writers: usize, f: WeightFunction) -> Result<f64> {
    if rank == 0 || rank > n_writers {
        return Err(Error::Argument(format!("rank {rank} outside 1..={n_writers}")));
    }
    let (n, big_n) = (rank as f64, n_writers as f64);
    Ok(match f {
        WeightFunction::Uniform { k } => k,
        WeightFunction::InvertedDistance => big_n / n,
        WeightFunction::InvertedDistanceSquared => big_n / (n * n),
        WeightFunction::ExponentialDecay { a } => (-a * n).exp(),
    })
}

/// Indices ordered by descending score, ties by ascending index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Scores of one unit (line or block-line) against every writer.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScore {
    /// Viterbi log-likelihood per writer.
    pub loglik: Vec<f64>,
    /// Frames scored.
    pub frames: usize,
    /// Softmax of length-normalized scores, divided by its maximum.
    pub probabilities: Vec<f64>,
}

impl LineScore {
    pub fn from_logliks(loglik: Vec<f64>, frames: usize) -> Result<Self> {
        if loglik.is_empty() || frames == 0 {
            return Err(Error::Score("no writers or no frames to score".into()));
        }
        let best = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return Err(Error::Score("no writer model admits the unit".into()));
        }
        let t = frames as f64;
        let probabilities = loglik.iter().map(|&s| ((s - best) / t).exp()).collect();
        Ok(Self { loglik, frames, probabilities })
    }

    pub fn ranking(&self) -> Vec<usize> {
        rank_order(&self.loglik)
    }
}

/// Writers (as registry indices) by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl RankedResult {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self { order: rank_order(&scores), scores }
    }

    pub fn winner(&self) -> usize {
        self.order[0]
    }

    /// 1-based rank of writer `w`.
    pub fn rank_of(&self, w: usize) -> Option<usize> {
        self.order.iter().position(|&x| x == w).map(|p| p + 1)
    }

    pub fn top(&self, n: usize) -> &[usize] {
        &self.order[..n.min(self.order.len())]
    }
}

/// Page score `F_i = Σ_j W_ij P_ij`, with `W_ij` the weight of writer i's
/// rank on unit j.
pub fn fuse_page(lines: &[LineScore], f: WeightFunction) -> Result<RankedResult> {
    let first = lines.first().ok_or_else(|| Error::Argument("no line scores to fuse".into()))?;
    let n = first.probabilities.len();
    if lines.iter().any(|l| l.probabilities.len() != n) {
        return Err(Error::Argument("line scores differ in writer count".into()));
    }
    let mut fused = vec![0.0; n];
    for l in lines {
        for (r, &w) in l.ranking().iter().enumerate() {
            fused[w] += weight(r + 1, n, f)? * l.probabilities[w];
        }
    }
    Ok(RankedResult::from_scores(fused))
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Line,
    BlockLine,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Mode::Line),
            "block-line" | "block" => Ok(Mode::BlockLine),
            _ => Err(Error::Argument(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Line => "line",
            Mode::BlockLine => "block-line",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub dim: usize,
}

/// Parses `fa:256`, `pca:64` or `lda:49`.
impl FromStr for TransformSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("transform {s:?}: expected fa|pca|lda:<dim>"));
        let (k, d) = s.split_once(':').ok_or_else(bad)?;
        let kind = match k {
            "fa" => TransformKind::Fa,
            "pca" => TransformKind::Pca,
            "lda" => TransformKind::Lda,
            _ => return Err(bad()),
        };
        Ok(TransformSpec { kind, dim: d.parse().map_err(|_| bad())? })
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            TransformKind::Fa => "fa",
            TransformKind::Pca => "pca",
            TransformKind::Lda => "lda",
        };
        write!(f, "{k}:{}", self.dim)
    }
}

/// Everything that shapes the writer models and how units are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub mode: Mode,
    pub window: SlidingWindowConfig,
    pub states: usize,
    pub mixtures: usize,
    pub iterations: usize,
    pub iterations_per_split: usize,
    pub drop_silence: bool,
    pub staff_lines: usize,
    pub transform: Option<TransformSpec>,
    pub transform_iterations: usize,
    pub strips: usize,
    pub projection: ProjectionConfig,
    pub grammar: GrammarConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Line,
            window: SlidingWindowConfig::default(),
            states: 4,
            mixtures: 64,
            iterations: 10,
            iterations_per_split: 3,
            drop_silence: true,
            staff_lines: 5,
            transform: None,
            transform_iterations: 50,
            strips: 8,
            projection: ProjectionConfig::default(),
            grammar: GrammarConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.states == 0 || self.mixtures == 0 {
            return Err(Error::Config("states and mixtures must be positive".into()));
        }
        if !(1..=16).contains(&self.strips) {
            return Err(Error::Config(format!("strip count {} outside 1..=16", self.strips)));
        }
        if let Some(t) = &self.transform {
            if t.dim == 0 || t.dim > self.window.dimension() {
                return Err(Error::Config(format!(
                    "transform dimension {} outside 1..={}",
                    t.dim,
                    self.window.dimension()
                )));
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        config_digest(self)
    }

    fn bw_config(&self) -> BaumWelchConfig {
        BaumWelchConfig {
            iterations: self.iterations,
            mixture_target: self.mixtures,
            iterations_per_split: self.iterations_per_split,
        }
    }
}

// ---------------------------------------------------------------------------
// Registry

#[derive(Debug, Clone, PartialEq)]
pub struct WriterModel {
    pub id: String,
    pub hmm: HmmParams,
}

/// Trained writer models sharing one feature configuration and transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    pub config: ModelConfig,
    pub transform: Option<Transform>,
    pub grammar: Option<FillerGrammar>,
    /// Sorted by id.
    pub writers: Vec<WriterModel>,
}

const REGISTRY_INDEX: &str = "registry.tsv";
const REGISTRY_CONFIG: &str = "config.toml";
const TRANSFORM_FILE: &str = "transform.bin";
const GRAMMAR_FILE: &str = "grammar.bin";

impl Registry {
    pub fn writer_ids(&self) -> Vec<&str> {
        self.writers.iter().map(|w| w.id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.writers.binary_search_by(|w| w.id.as_str().cmp(id)).ok()
    }

    /// Writes `registry.tsv` (writer, model file, config digest, transform
    /// file or `none`), `config.toml`, one `.hmm` file per writer and the
    /// optional transform and grammar files.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(Error::io_at(dir))?;
        let digest = self.config.digest();
        let config = toml::to_string(&self.config).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join(REGISTRY_CONFIG), config)?;
        let transform_id = match &self.transform {
            Some(t) => {
                t.write_file(&dir.join(TRANSFORM_FILE))?;
                TRANSFORM_FILE
            }
            None => "none",
        };
        if let Some(g) = &self.grammar {
            fs::write(dir.join(GRAMMAR_FILE), g.to_bytes()?)?;
        }
        let mut index = String::from("# writer\tmodel\tdigest\ttransform\n");
        for (i, w) in self.writers.iter().enumerate() {
            let file = format!("writer_{i:04}.hmm");
            fs::write(dir.join(&file), w.hmm.to_bytes()?)?;
            index.push_str(&format!("{}\t{file}\t{digest}\t{transform_id}\n", w.id));
        }
        fs::write(dir.join(REGISTRY_INDEX), index)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Registry> {
        let cfg_path = dir.join(REGISTRY_CONFIG);
        let text = fs::read_to_string(&cfg_path).map_err(Error::io_at(&cfg_path))?;
        let config: ModelConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let digest = config.digest();
        let index_path = dir.join(REGISTRY_INDEX);
        let index = fs::read_to_string(&index_path).map_err(Error::io_at(&index_path))?;
        let mut writers = Vec::new();
        let mut transform_id: Option<String> = None;
        for (n, line) in index.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Format(format!("{REGISTRY_INDEX} line {}: expected 4 fields", n + 1)));
            }
            if cols[2] != digest {
                return Err(Error::Config(format!(
                    "writer {} was trained with config {} but the registry config digests to {digest}",
                    cols[0], cols[2]
                )));
            }
            match &transform_id {
                Some(t) if t != cols[3] => {
                    return Err(Error::Format("writers reference different transforms".into()));
                }
                _ => transform_id = Some(cols[3].to_string()),
            }
            let hmm_path = dir.join(cols[1]);
            let hmm = HmmParams::from_bytes(&fs::read(&hmm_path).map_err(Error::io_at(&hmm_path))?)?;
            writers.push(WriterModel { id: cols[0].to_string(), hmm });
        }
        if writers.is_empty() {
            return Err(Error::Format("registry lists no writers".into()));
        }
        writers.sort_by(|a, b| a.id.cmp(&b.id));
        let transform = match transform_id.as_deref() {
            None | Some("none") => None,
            Some(file) => Some(Transform::read_file(&dir.join(file))?),
        };
        let grammar_path = dir.join(GRAMMAR_FILE);
        let grammar = if grammar_path.exists() {
            Some(FillerGrammar::from_bytes(&fs::read(&grammar_path).map_err(Error::io_at(&grammar_path))?)?)
        } else {
            None
        };
        Ok(Registry { config, transform, grammar, writers })
    }
}

// ---------------------------------------------------------------------------
// Feature extraction per unit

/// Raw (untransformed) features of a unit image with silence frames removed.
pub fn unit_frames(img: &GrayImage, cfg: &ModelConfig) -> Result<Array2<f64>> {
    let seq = sliding_lgh(img, &cfg.window)?;
    if !cfg.drop_silence {
        return Ok(seq.frames);
    }
    let mask = detect_silence(&binarize(img), &seq, cfg.staff_lines);
    Ok(seq.select(&mask.keep()).frames)
}

fn apply_transform(frames: Array2<f64>, transform: Option<&Transform>) -> Result<Array2<f64>> {
    match transform {
        Some(t) => t.apply_frames(frames.view()),
        None => Ok(frames),
    }
}

/// Units of a page for the given mode.
pub fn page_units(page: &GrayImage, cfg: &ModelConfig, grammar: Option<&FillerGrammar>) -> Result<Vec<LineBox>> {
    match cfg.mode {
        Mode::Line => Ok(segment_lines_projection(page, &cfg.projection)),
        Mode::BlockLine => {
            let g = grammar.ok_or_else(|| Error::Argument("block-line mode needs a filler grammar".into()))?;
            segment_page_blocks(page, cfg.strips, g, &cfg.window)
        }
    }
}

fn units_frames(page: &GrayImage, boxes: &[LineBox], cfg: &ModelConfig) -> Vec<(LineBox, Result<Array2<f64>>)> {
    boxes
        .par_iter()
        .map(|b| {
            let frames = b.crop(page).and_then(|img| unit_frames(&img, cfg));
            (*b, frames)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Training

/// One training page of a known writer.
#[derive(Debug, Clone)]
pub struct TrainingPage {
    pub writer: String,
    pub image: GrayImage,
    /// Ground-truth line boxes, used for grammar training when present.
    pub line_boxes: Option<Vec<RowInterval>>,
}

/// Grammar from ground-truth boxes when available, else from projection
/// segmentation used as pseudo-labels.
pub fn train_grammar_from_pages(pages: &[TrainingPage], cfg: &ModelConfig) -> Result<FillerGrammar> {
    let annotated: Vec<AnnotatedPage> = pages
        .iter()
        .map(|p| {
            let boxes = match &p.line_boxes {
                Some(b) => b.clone(),
                None => segment_lines_projection(&p.image, &cfg.projection)
                    .iter()
                    .map(|b| RowInterval { top: b.top, bottom: b.bottom })
                    .collect(),
            };
            AnnotatedPage::from_line_boxes(p.image.clone(), &boxes, cfg.strips)
        })
        .collect::<Result<_>>()?;
    let set = zone_training_set(&annotated, cfg.strips, &cfg.window)?;
    train_filler_grammar(&set, &cfg.grammar)
}

/// Trains one HMM per writer (ids sorted ascending). In block-line mode a
/// grammar is trained first unless one is supplied.
pub fn train_writer_models(pages: &[TrainingPage], cfg: &ModelConfig, grammar: Option<FillerGrammar>) -> Result<Registry> {
    cfg.validate()?;
    let mut ids: Vec<String> = pages.iter().map(|p| p.writer.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::Training("no training pages".into()));
    }
    let grammar = match (cfg.mode, grammar) {
        (Mode::BlockLine, None) => Some(train_grammar_from_pages(pages, cfg)?),
        (_, g) => g,
    };

    // Raw frames per unit, grouped by writer.
    let per_page: Vec<Vec<Array2<f64>>> = pages
        .par_iter()
        .map(|p| {
            let boxes = page_units(&p.image, cfg, grammar.as_ref())?;
            Ok(units_frames(&p.image, &boxes, cfg)
                .into_iter()
                .filter_map(|(_, f)| f.ok())
                .filter(|f| f.nrows() > 0)
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut by_writer: Vec<Vec<Array2<f64>>> = vec![Vec::new(); ids.len()];
    for (p, units) in pages.iter().zip(per_page) {
        let w = ids.binary_search(&p.writer).expect("id collected above");
        by_writer[w].extend(units);
    }
    for (id, units) in ids.iter().zip(&by_writer) {
        if units.iter().all(|u| u.nrows() == 0) {
            return Err(Error::Training(format!("writer {id} has no usable frames")));
        }
    }

    let transform = match cfg.transform {
        None => None,
        Some(spec) => Some(fit_transform(&by_writer, spec, cfg)?),
    };
    let by_writer: Vec<Vec<Array2<f64>>> = by_writer
        .into_iter()
        .map(|units| units.into_iter().map(|u| apply_transform(u, transform.as_ref())).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let bw = cfg.bw_config();
    let hmms: Vec<HmmParams> = ids
        .par_iter()
        .zip(by_writer.par_iter())
        .map(|(id, units)| {
            let seqs: Vec<ArrayView2<'_, f64>> =
                units.iter().filter(|u| u.nrows() >= cfg.states).map(|u| u.view()).collect();
            if seqs.is_empty() {
                return Err(Error::Training(format!(
                    "writer {id} has no unit with at least {} frames",
                    cfg.states
                )));
            }
            let init = hmm_init_flat(&seqs, cfg.states)?;
            let (hmm, _) = baum_welch(&seqs, &init, &bw).map_err(|e| Error::Training(format!("writer {id}: {e}")))?;
            Ok(hmm)
        })
        .collect::<Result<_>>()?;
    let writers = ids.into_iter().zip(hmms).map(|(id, hmm)| WriterModel { id, hmm }).collect();
    Ok(Registry { config: cfg.clone(), transform, grammar, writers })
}

fn fit_transform(by_writer: &[Vec<Array2<f64>>], spec: TransformSpec, cfg: &ModelConfig) -> Result<Transform> {
    let views: Vec<ArrayView2<'_, f64>> = by_writer.iter().flatten().map(|u| u.view()).collect();
    let pooled = concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
    Ok(match spec.kind {
        TransformKind::Fa => Transform::Fa(fa_fit(pooled.view(), spec.dim, cfg.transform_iterations, cfg.seed)?),
        TransformKind::Pca => Transform::Pca(pca_fit(pooled.view(), spec.dim)?),
        TransformKind::Lda => {
            let labels: Vec<usize> = by_writer
                .iter()
                .enumerate()
                .flat_map(|(w, units)| std::iter::repeat_n(w, units.iter().map(|u| u.nrows()).sum()))
                .collect();
            Transform::Lda(lda_fit(pooled.view(), &labels, spec.dim)?)
        }
    })
}

// ---------------------------------------------------------------------------
// Identification

/// Scores transformed frames against every writer.
pub fn score_frames(frames: ArrayView2<'_, f64>, registry: &Registry) -> Result<LineScore> {
    if registry.writers.is_empty() {
        return Err(Error::Score("empty registry".into()));
    }
    if frames.nrows() == 0 {
        return Err(Error::Score("unit has no non-silence frames".into()));
    }
    let loglik: Vec<f64> = registry
        .writers
        .par_iter()
        .map(|w| viterbi_loglik(frames, &w.hmm).map(|(s, _)| s))
        .collect::<Result<_>>()?;
    LineScore::from_logliks(loglik, frames.nrows())
}

pub fn score_line(line: &GrayImage, registry: &Registry) -> Result<LineScore> {
    let frames = unit_frames(line, &registry.config)?;
    if frames.nrows() == 0 {
        return Err(Error::Score("unit has no non-silence frames".into()));
    }
    let frames = apply_transform(frames, registry.transform.as_ref())?;
    score_frames(frames.view(), registry)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitResult {
    pub unit: LineBox,
    pub score: LineScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageResult {
    pub units: Vec<UnitResult>,
    /// Units that could not be scored.
    pub skipped: usize,
    pub ranked: RankedResult,
}

/// Segments, scores every unit and fuses. Unscorable units are skipped.
pub fn identify_page(page: &GrayImage, registry: &Registry, weighting: WeightFunction) -> Result<PageResult> {
    let boxes = page_units(page, &registry.config, registry.grammar.as_ref())?;
    let scored: Vec<(LineBox, Result<LineScore>)> = boxes
        .par_iter()
        .map(|b| {
            let s = b.crop(page).and_then(|img| score_line(&img, registry));
            (*b, s)
        })
        .collect();
    let mut units = Vec::new();
    let mut skipped = 0;
    for (unit, s) in scored {
        match s {
            Ok(score) => units.push(UnitResult { unit, score }),
            Err(e) => {
                log::warn!("skipping unit rows {}-{}: {e}", unit.top, unit.bottom);
                skipped += 1;
            }
        }
    }
    if units.is_empty() {
        return Err(Error::Identification(format!("no scorable units among {} found", boxes.len())));
    }
    let lines: Vec<LineScore> = units.iter().map(|u| u.score.clone()).collect();
    let ranked = fuse_page(&lines, weighting)?;
    Ok(PageResult { units, skipped, ranked })
}

/// Machine-readable identification report.
pub fn format_page_result(result: &PageResult, registry: &Registry, weighting: WeightFunction) -> String {
    let ids = registry.writer_ids();
    let mut out = format!("config {}\nmode {}\nweighting {weighting}\nwriters {}\n", registry.config.digest(), registry.config.mode, ids.join(" "));
    for u in &result.units {
        let unit = match u.unit.source {
            crate::segmentation::BoxSource::Page => format!("line {} {}", u.unit.top, u.unit.bottom),
            crate::segmentation::BoxSource::Strip { index, .. } => format!("strip {index} {} {}", u.unit.top, u.unit.bottom),
        };
        let probs: Vec<String> = u.score.probabilities.iter().map(|p| format!("{p:.6}")).collect();
        out.push_str(&format!("unit {unit} frames {} best {} prob {}\n", u.score.frames, ids[u.score.ranking()[0]], probs.join(" ")));
    }
    out.push_str(&format!("skipped {}\n", result.skipped));
    for (r, &w) in result.ranked.order.iter().enumerate() {
        out.push_str(&format!("rank {} {} {:.6}\n", r + 1, ids[w], result.ranked.scores[w]));
    }
    out.push_str(&format!("winner {}\n", ids[result.ranked.winner()]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_weights() {
        assert_eq!(weight(1, 50, WeightFunction::InvertedDistance).unwrap(), 50.0);
        assert_eq!(weight(2, 50, WeightFunction::InvertedDistanceSquared).unwrap(), 12.5);
        assert_eq!(weight(7, 50, WeightFunction::UNIFORM).unwrap(), 1.0);
        assert!((weight(2, 5, WeightFunction::EXPONENTIAL).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(weight(0, 3, WeightFunction::InvertedDistance).is_err());
        assert!(weight(4, 3, WeightFunction::InvertedDistance).is_err());
    }

    #[test]
    fn weight_names_round_trip() {
        for f in WeightFunction::all() {
            assert_eq!(f.to_string().parse::<WeightFunction>().unwrap(), f);
        }
        assert!("bogus".parse::<WeightFunction>().is_err());
    }

    #[test]
    fn single_writer_probability_is_one() {
        let s = LineScore::from_logliks(vec![-1234.5], 10).unwrap();
        assert_eq!(s.probabilities, vec![1.0]);
    }

    #[test]
    fn worked_fusion_example() {
        let mk = |p: [f64; 3]| LineScore { loglik: p.iter().map(|v| v.ln()).collect(), frames: 1, probabilities: p.to_vec() };
        let lines = [mk([1.0, 0.5, 0.2]), mk([0.4, 1.0, 0.3])];
        let r = fuse_page(&lines, WeightFunction::InvertedDistance).unwrap();
        let expect = [3.6, 3.75, 0.5];
        for (a, b) in r.scores.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.winner(), 1);
    }

    #[test]
    fn ties_broken_by_index() {
        assert_eq!(rank_order(&[1.0, 2.0, 2.0, 0.0]), vec![1, 2, 0, 3]);
    }

    #[test]
    fn empty_fusion_is_error() {
        assert!(fuse_page(&[], WeightFunction::InvertedDistance).is_err());
    }
}
