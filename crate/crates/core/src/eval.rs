//! Cross-validation harness and metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SlidingWindowConfig;
use crate::imgproc::{load_page, GrayImage};
use crate::dimred::TransformKind;
use crate::pipeline::{
    identify_page, train_writer_models, ModelConfig, PageResult, Registry, TrainingPage, TransformSpec, WeightFunction,
};
use crate::synth::{add_gaussian_noise, generate_page, parse_sidecar, RowInterval, SynthGroundTruth, SynthPageSpec};

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub writer: String,
    pub page: String,
    pub path: PathBuf,
}

/// `writer <tab> page <tab> path` per line; `#` starts a comment.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Format(format!("manifest line {}: expected writer, page and path", n + 1)));
        }
        out.push(ManifestEntry { writer: cols[0].into(), page: cols[1].into(), path: cols[2].into() });
    }
    Ok(out)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.writer, e.page, e.path.display()))
        .collect()
}

/// Sidecar path for a page image: same stem with extension `gt.txt`.
pub fn sidecar_path(page: &Path) -> PathBuf {
    page.with_extension("gt.txt")
}

#[derive(Debug, Clone)]
pub struct DatasetPage {
    pub writer: String,
    pub page: String,
    pub image: GrayImage,
    pub line_boxes: Option<Vec<RowInterval>>,
}

/// Loads every manifest page; relative paths resolve against `base`. A
/// ground-truth sidecar next to a page is picked up when present.
pub fn load_dataset(entries: &[ManifestEntry], base: &Path) -> Result<Vec<DatasetPage>> {
    entries
        .par_iter()
        .map(|e| {
            let path = if e.path.is_absolute() { e.path.clone() } else { base.join(&e.path) };
            let image = load_page(&path)?;
            let side = sidecar_path(&path);
            let line_boxes = if side.exists() {
                Some(parse_sidecar(&std::fs::read_to_string(&side).map_err(Error::io_at(&side))?)?.into_iter().map(|l| l.rows).collect())
            } else {
                None
            };
            Ok(DatasetPage { writer: e.writer.clone(), page: e.page.clone(), image, line_boxes })
        })
        .collect()
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Writer ids used for synthetic corpora.
pub fn synthetic_writer_id(w: usize) -> String {
    format!("w{w:02}")
}

/// `writers × pages` synthetic pages with their full ground truth. Each
/// writer gets its own style seed; page content seeds are distinct per page.
pub fn synthetic_corpus(
    writers: usize,
    pages: usize,
    spec: &SynthPageSpec,
    seed: u64,
) -> Result<Vec<(DatasetPage, SynthGroundTruth)>> {
    let jobs: Vec<(usize, usize)> = (0..writers).flat_map(|w| (0..pages).map(move |p| (w, p))).collect();
    jobs.par_iter()
        .map(|&(w, p)| {
            let spec = SynthPageSpec { style_seed: mix(seed, w as u64 + 1, 0), ..spec.clone() };
            let (image, truth) = generate_page(&spec, mix(seed, w as u64 + 1, p as u64 + 1))?;
            let page = DatasetPage {
                writer: synthetic_writer_id(w),
                page: format!("p{p:02}"),
                image,
                line_boxes: Some(truth.line_boxes.clone()),
            };
            Ok((page, truth))
        })
        .collect()
}

pub fn synthetic_dataset(writers: usize, pages: usize, spec: &SynthPageSpec, seed: u64) -> Result<Vec<DatasetPage>> {
    Ok(synthetic_corpus(writers, pages, spec, seed)?.into_iter().map(|(p, _)| p).collect())
}

/// Adds Gaussian noise of `level` to every page with per-page seeds.
pub fn degrade_dataset(pages: &[DatasetPage], level: f64, seed: u64) -> Result<Vec<DatasetPage>> {
    pages
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(DatasetPage { image: add_gaussian_noise(&p.image, level, mix(seed, 0xA5A5, i as u64))?, ..p.clone() })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Folds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub folds: usize,
    pub seed: u64,
    /// `assignments[f][i]`: split of page `i` in fold `f`.
    pub assignments: Vec<Vec<Split>>,
}

impl FoldPlan {
    pub fn pages(&self, fold: usize, split: Split) -> Vec<usize> {
        (0..self.assignments[fold].len()).filter(|&i| self.assignments[fold][i] == split).collect()
    }
}

/// Stratified folds. Each writer's pages are shuffled and dealt into
/// `folds` near-equal groups; fold `f` tests group `f`, validates on group
/// `f + 1` and trains on the rest. Two folds have no validation split; one
/// fold is a fixed 8:1:1 split.
pub fn make_folds(page_writers: &[String], folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds == 0 {
        return Err(Error::Argument("fold count must be positive".into()));
    }
    let mut writers: Vec<&String> = page_writers.iter().collect();
    writers.sort();
    writers.dedup();
    let mut assignments = vec![vec![Split::Train; page_writers.len()]; folds];
    for (wi, w) in writers.iter().enumerate() {
        let mut pages: Vec<usize> = (0..page_writers.len()).filter(|&i| &&page_writers[i] == w).collect();
        let need = if folds == 1 { 3 } else { folds };
        if pages.len() < need {
            return Err(Error::Data(format!("writer {w} has {} pages, needs at least {need}", pages.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, wi as u64, 0x5EED));
        pages.shuffle(&mut rng);
        let n = pages.len();
        if folds == 1 {
            let held = (n / 10).max(1);
            for &p in &pages[..held] {
                assignments[0][p] = Split::Test;
            }
            for &p in &pages[held..2 * held] {
                assignments[0][p] = Split::Validation;
            }
            continue;
        }
        let group = |g: usize| &pages[g * n / folds..(g + 1) * n / folds];
        for f in 0..folds {
            for &p in group(f) {
                assignments[f][p] = Split::Test;
            }
            if folds > 2 {
                for &p in group((f + 1) % folds) {
                    assignments[f][p] = Split::Validation;
                }
            }
        }
    }
    Ok(FoldPlan { folds, seed, assignments })
}

// ---------------------------------------------------------------------------
// Metrics

/// True writer and the ranking produced for one unit or page.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub truth: usize,
    pub ranking: Vec<usize>,
}

impl Prediction {
    pub fn rank(&self) -> usize {
        self.ranking.iter().position(|&w| w == self.truth).map_or(usize::MAX, |p| p + 1)
    }
}

/// Percentage of predictions whose truth is among the first `n`.
pub fn top_n_accuracy(results: &[Prediction], n: usize) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let hits = results.iter().filter(|p| p.rank() <= n).count();
    100.0 * hits as f64 / results.len() as f64
}

/// `100 (E − O) / E`, rounded to 1e-9.
pub fn error_rate(expected: f64, observed: f64) -> Result<f64> {
    if !(expected > 0.0) {
        return Err(Error::Argument(format!("expected percentage {expected} must be positive")));
    }
    let v = 100.0 * (expected - observed) / expected;
    Ok((v * 1e9).round() / 1e9)
}

/// `m[true][predicted]` counts of top-1 predictions.
pub fn confusion_matrix(results: &[Prediction], n_writers: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_writers]; n_writers];
    for p in results {
        if let Some(&top) = p.ranking.first() {
            m[p.truth][top] += 1;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Benchmark

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub folds: usize,
    pub seed: u64,
    /// Weighting used for grid selection and the headline numbers.
    pub weighting: WeightFunction,
    /// Candidate model configurations; selection on the validation split.
    pub grid: Vec<ModelConfig>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { folds: 10, seed: 0, weighting: WeightFunction::InvertedDistance, grid: vec![ModelConfig::default()] }
    }
}

impl BenchmarkConfig {
    /// Compact models sized for the synthetic corpus; selection between
    /// two mixture counts.
    pub fn synthetic(folds: usize, seed: u64) -> Self {
        let base = ModelConfig {
            window: SlidingWindowConfig { orientation_bins: 8, ..Default::default() },
            states: 4,
            mixtures: 8,
            iterations: 4,
            iterations_per_split: 2,
            transform: Some(TransformSpec { kind: TransformKind::Fa, dim: 32 }),
            seed,
            ..Default::default()
        };
        let grid = [4, 8].iter().map(|&m| ModelConfig { mixtures: m, ..base.clone() }).collect();
        Self { folds, seed, weighting: WeightFunction::InvertedDistance, grid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub selected: usize,
    /// Validation page accuracy per grid point; `None` when that point failed.
    pub validation: Vec<Option<f64>>,
    pub grid_errors: Vec<Option<String>>,
    pub unit_accuracy: f64,
    /// Page top-1 accuracy per weight function, in `WeightFunction::all()` order.
    pub page_accuracy: Vec<f64>,
    pub test_pages: usize,
    pub test_units: usize,
    pub skipped_pages: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    pub train_s: f64,
    pub identify_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub writers: Vec<String>,
    pub mode: String,
    pub weighting: WeightFunction,
    pub folds: Vec<FoldReport>,
    /// Averages of the per-fold accuracies.
    pub unit_accuracy: f64,
    pub page_accuracy: f64,
    pub page_accuracy_by_weighting: Vec<f64>,
    /// Pooled page-level top-N for N = 1..=writers.
    pub top_n: Vec<f64>,
    pub writer_error: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub unit_predictions: Vec<Prediction>,
    pub page_predictions: Vec<Prediction>,
    pub timings: Timings,
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.4}")
}

impl EvalReport {
    /// Deterministic text rendering (no timings).
    pub fn render(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "writers {}", self.writers.join(" "));
        let _ = writeln!(o, "mode {}", self.mode);
        let _ = writeln!(o, "weighting {}", self.weighting);
        let _ = writeln!(o, "folds {}", self.folds.len());
        for f in &self.folds {
            let val: Vec<String> = f.validation.iter().map(|v| v.map_or("failed".into(), fmt_pct)).collect();
            let _ = writeln!(
                o,
                "fold {} selected {} validation {} unit_top1 {} page_top1 {} test_pages {} test_units {} skipped_pages {}",
                f.fold,
                f.selected,
                if val.is_empty() { "-".to_string() } else { val.join(",") },
                fmt_pct(f.unit_accuracy),
                fmt_pct(f.page_accuracy[weighting_index(self.weighting)]),
                f.test_pages,
                f.test_units,
                f.skipped_pages
            );
            for (g, e) in f.grid_errors.iter().enumerate() {
                if let Some(e) = e {
                    let _ = writeln!(o, "fold {} grid {g} error {e}", f.fold);
                }
            }
        }
        let _ = writeln!(o, "unit_top1 {}", fmt_pct(self.unit_accuracy));
        let _ = writeln!(o, "page_top1 {}", fmt_pct(self.page_accuracy));
        for (f, a) in WeightFunction::all().iter().zip(&self.page_accuracy_by_weighting) {
            let _ = writeln!(o, "page_top1_by_weighting {f} {}", fmt_pct(*a));
        }
        let top: Vec<String> = self.top_n.iter().map(|v| fmt_pct(*v)).collect();
        let _ = writeln!(o, "page_top_n {}", top.join(" "));
        for (w, e) in self.writers.iter().zip(&self.writer_error) {
            let _ = writeln!(o, "writer_error {w} {}", fmt_pct(*e));
        }
        for (w, row) in self.writers.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(o, "confusion {w} {}", cells.join(" "));
        }
        o
    }

    pub fn render_timings(&self) -> String {
        format!(
            "train_s {:.3}\nidentify_s {:.3}\ntotal_s {:.3}\n",
            self.timings.train_s, self.timings.identify_s, self.timings.total_s
        )
    }
}

fn weighting_index(f: WeightFunction) -> usize {
    match f {
        WeightFunction::Uniform { .. } => 0,
        WeightFunction::InvertedDistance => 1,
        WeightFunction::InvertedDistanceSquared => 2,
        WeightFunction::ExponentialDecay { .. } => 3,
    }
}

fn weight_set(primary: WeightFunction) -> [WeightFunction; 4] {
    let mut all = WeightFunction::all();
    all[weighting_index(primary)] = primary;
    all
}

fn training_pages(data: &[DatasetPage], idx: &[usize]) -> Vec<TrainingPage> {
    idx.iter()
        .map(|&i| TrainingPage {
            writer: data[i].writer.clone(),
            image: data[i].image.clone(),
            line_boxes: data[i].line_boxes.clone(),
        })
        .collect()
}

fn identify_all(data: &[DatasetPage], idx: &[usize], reg: &Registry, f: WeightFunction) -> Vec<Option<PageResult>> {
    idx.par_iter()
        .map(|&i| match identify_page(&data[i].image, reg, f) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("page {}/{}: {e}", data[i].writer, data[i].page);
                None
            }
        })
        .collect()
}

fn page_accuracy(data: &[DatasetPage], idx: &[usize], results: &[Option<PageResult>], reg: &Registry) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let hits = idx
        .iter()
        .zip(results)
        .filter(|(&i, r)| r.as_ref().is_some_and(|r| reg.index_of(&data[i].writer) == Some(r.ranked.winner())))
        .count();
    100.0 * hits as f64 / idx.len() as f64
}

struct FoldOutcome {
    report: FoldReport,
    units: Vec<Prediction>,
    pages: Vec<Prediction>,
    train_s: f64,
    identify_s: f64,
}

fn run_fold(data: &[DatasetPage], plan: &FoldPlan, fold: usize, cfg: &BenchmarkConfig) -> Result<FoldOutcome> {
    let train = plan.pages(fold, Split::Train);
    let val = plan.pages(fold, Split::Validation);
    let test = plan.pages(fold, Split::Test);
    let train_pages = training_pages(data, &train);
    let t0 = Instant::now();
    let mut trained: Vec<Result<Registry>> = cfg
        .grid
        .iter()
        .map(|m| train_writer_models(&train_pages, &ModelConfig { seed: mix(cfg.seed, fold as u64, 1), ..m.clone() }, None))
        .collect();
    let mut train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut validation = Vec::new();
    let mut selected = 0;
    if cfg.grid.len() > 1 && !val.is_empty() {
        let mut best = f64::NEG_INFINITY;
        for (g, reg) in trained.iter().enumerate() {
            let acc = reg.as_ref().ok().map(|reg| {
                let res = identify_all(data, &val, reg, cfg.weighting);
                page_accuracy(data, &val, &res, reg)
            });
            if let Some(a) = acc {
                if a > best {
                    best = a;
                    selected = g;
                }
            }
            validation.push(acc);
        }
    } else if let Some(g) = trained.iter().position(|r| r.is_ok()) {
        selected = g;
    }
    let grid_errors: Vec<Option<String>> = trained.iter().map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
    let reg = std::mem::replace(&mut trained[selected], Err(Error::Training("taken".into())))?;
    let selection_s = t1.elapsed().as_secs_f64();
    train_s += selection_s;

    let t2 = Instant::now();
    let results = identify_all(data, &test, &reg, cfg.weighting);
    let weights = weight_set(cfg.weighting);
    let mut units = Vec::new();
    let mut pages = Vec::new();
    let mut page_hits = [0usize; 4];
    let mut skipped_pages = 0;
    for (&i, r) in test.iter().zip(&results) {
        let truth = reg
            .index_of(&data[i].writer)
            .ok_or_else(|| Error::Data(format!("test writer {} has no model", data[i].writer)))?;
        let Some(r) = r else {
            skipped_pages += 1;
            pages.push(Prediction { truth, ranking: Vec::new() });
            continue;
        };
        for u in &r.units {
            units.push(Prediction { truth, ranking: u.score.ranking() });
        }
        let lines: Vec<_> = r.units.iter().map(|u| u.score.clone()).collect();
        for (k, f) in weights.iter().enumerate() {
            let fused = crate::pipeline::fuse_page(&lines, *f)?;
            if fused.winner() == truth {
                page_hits[k] += 1;
            }
            if *f == cfg.weighting {
                pages.push(Prediction { truth, ranking: fused.order.clone() });
            }
        }
    }
    let identify_s = t2.elapsed().as_secs_f64();
    let n_test = test.len().max(1) as f64;
    Ok(FoldOutcome {
        report: FoldReport {
            fold,
            selected,
            validation,
            grid_errors,
            unit_accuracy: top_n_accuracy(&units, 1),
            page_accuracy: page_hits.iter().map(|&h| 100.0 * h as f64 / n_test).collect(),
            test_pages: test.len(),
            test_units: units.len(),
            skipped_pages,
        },
        units,
        pages,
        train_s,
        identify_s,
    })
}

/// Full cross-validation run: per fold, train every grid point, select on
/// validation pages, then identify test pages.
pub fn run_benchmark(data: &[DatasetPage], cfg: &BenchmarkConfig) -> Result<EvalReport> {
    if cfg.grid.is_empty() {
        return Err(Error::Config("empty configuration grid".into()));
    }
    for m in &cfg.grid {
        m.validate()?;
    }
    let start = Instant::now();
    let page_writers: Vec<String> = data.iter().map(|p| p.writer.clone()).collect();
    let plan = make_folds(&page_writers, cfg.folds, cfg.seed)?;
    let mut writers = page_writers.clone();
    writers.sort();
    writers.dedup();
    let outcomes: Vec<FoldOutcome> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| run_fold(data, &plan, f, cfg))
        .collect::<Result<_>>()?;

    let n = outcomes.len() as f64;
    let unit_accuracy = outcomes.iter().map(|o| o.report.unit_accuracy).sum::<f64>() / n;
    let page_accuracy_by_weighting: Vec<f64> =
        (0..4).map(|k| outcomes.iter().map(|o| o.report.page_accuracy[k]).sum::<f64>() / n).collect();
    let page_accuracy = page_accuracy_by_weighting[weighting_index(cfg.weighting)];
    let unit_predictions: Vec<Prediction> = outcomes.iter().flat_map(|o| o.units.clone()).collect();
    let page_predictions: Vec<Prediction> = outcomes.iter().flat_map(|o| o.pages.clone()).collect();
    let top_n = (1..=writers.len()).map(|k| top_n_accuracy(&page_predictions, k)).collect();
    let writer_error = (0..writers.len())
        .map(|w| {
            let mine: Vec<Prediction> = page_predictions.iter().filter(|p| p.truth == w).cloned().collect();
            error_rate(100.0, top_n_accuracy(&mine, 1))
        })
        .collect::<Result<_>>()?;
    let confusion = confusion_matrix(&page_predictions, writers.len());
    let timings = Timings {
        train_s: outcomes.iter().map(|o| o.train_s).sum(),
        identify_s: outcomes.iter().map(|o| o.identify_s).sum(),
        total_s: start.elapsed().as_secs_f64(),
    };
    Ok(EvalReport {
        writers,
        mode: cfg.grid[0].mode.to_string(),
        weighting: cfg.weighting,
        folds: outcomes.into_iter().map(|o| o.report).collect(),
        unit_accuracy,
        page_accuracy,
        page_accuracy_by_weighting,
        top_n,
        writer_error,
        confusion,
        unit_predictions,
        page_predictions,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(writers: usize, pages: usize) -> Vec<String> {
        (0..writers).flat_map(|w| std::iter::repeat_n(format!("w{w}"), pages)).collect()
    }

    #[test]
    fn ten_fold_split_sizes() {
        let plan = make_folds(&ids(50, 20), 10, 3).unwrap();
        for f in 0..10 {
            for w in 0..50 {
                let count = |s: Split| (w * 20..(w + 1) * 20).filter(|&i| plan.assignments[f][i] == s).count();
                assert_eq!((count(Split::Train), count(Split::Validation), count(Split::Test)), (16, 2, 2));
            }
        }
    }

    #[test]
    fn each_page_tested_once() {
        let plan = make_folds(&ids(3, 7), 5, 9).unwrap();
        for i in 0..21 {
            let n = (0..5).filter(|&f| plan.assignments[f][i] == Split::Test).count();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn too_few_pages() {
        assert!(matches!(make_folds(&ids(2, 3), 5, 0), Err(Error::Data(_))));
    }

    #[test]
    fn hand_counted_top_n() {
        let p = |truth: usize, ranking: Vec<usize>| Prediction { truth, ranking };
        let r = vec![p(0, vec![0, 1, 2]), p(0, vec![1, 0, 2]), p(0, vec![1, 2, 0]), p(2, vec![2, 0, 1])];
        assert_eq!(top_n_accuracy(&r, 1), 50.0);
        assert_eq!(top_n_accuracy(&r, 2), 75.0);
        assert_eq!(top_n_accuracy(&r, 3), 100.0);
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(error_rate(100.0, 88.65).unwrap(), 11.35);
        assert_eq!(error_rate(80.0, 60.0).unwrap(), 25.0);
        assert_eq!(error_rate(42.0, 42.0).unwrap(), 0.0);
        assert!(error_rate(0.0, 1.0).is_err());
    }

    #[test]
    fn confusion_single_miss() {
        let m = confusion_matrix(&[Prediction { truth: 0, ranking: vec![1, 0] }], 2);
        assert_eq!(m, vec![vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn manifest_round_trip() {
        let text = "w1\tp1\ta/b.png\n# c\nw2\tp9\tc.pgm\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(format_manifest(&m), "w1\tp1\ta/b.png\nw2\tp9\tc.pgm\n");
        assert!(parse_manifest("only\ttwo\n").is_err());
    }
}
