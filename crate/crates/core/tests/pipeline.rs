use proptest::prelude::*;
use scorewriter::eval::synthetic_dataset;
use scorewriter::features::SlidingWindowConfig;
use scorewriter::imgproc::{GrayImage, BACKGROUND};
use scorewriter::pipeline::{
    fuse_page, identify_page, rank_order, train_writer_models, weight, LineScore, Mode, ModelConfig, RankedResult,
    Registry, TrainingPage, TransformSpec, WeightFunction,
};
use scorewriter::synth::SynthPageSpec;
use tempfile::TempDir;

fn logliks(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5000.0f64..0.0, n)
}

fn line_set() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, usize)>)> {
    (1usize..6).prop_flat_map(|n| (Just(n), proptest::collection::vec((logliks(n), 1usize..200), 1..6)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shifting_logliks_changes_nothing(l in logliks(5), frames in 1usize..500, c in -1e4f64..1e4) {
        let a = LineScore::from_logliks(l.clone(), frames).unwrap();
        let b = LineScore::from_logliks(l.iter().map(|v| v + c).collect(), frames).unwrap();
        prop_assert_eq!(a.ranking(), b.ranking());
        for (p, q) in a.probabilities.iter().zip(&b.probabilities) {
            prop_assert!((p - q).abs() < 1e-9);
        }
        prop_assert!(a.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert_eq!(a.probabilities[a.ranking()[0]], 1.0);
    }

    #[test]
    fn single_line_keeps_its_winner(l in logliks(6), frames in 1usize..300) {
        let s = LineScore::from_logliks(l, frames).unwrap();
        for f in WeightFunction::all() {
            let r = fuse_page(std::slice::from_ref(&s), f).unwrap();
            prop_assert_eq!(r.winner(), s.ranking()[0], "{}", f);
        }
    }

    #[test]
    fn weights_positive_and_non_increasing(n in 1usize..60) {
        for f in WeightFunction::all() {
            let w: Vec<f64> = (1..=n).map(|r| weight(r, n, f).unwrap()).collect();
            prop_assert!(w.iter().all(|&v| v > 0.0));
            prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn top_sets_are_nested((_, lines) in line_set()) {
        let scores: Vec<LineScore> = lines.into_iter().map(|(l, t)| LineScore::from_logliks(l, t).unwrap()).collect();
        let r = fuse_page(&scores, WeightFunction::InvertedDistance).unwrap();
        for k in 1..r.order.len() {
            prop_assert_eq!(&r.top(k + 1)[..k], r.top(k));
        }
        let mut seen = r.order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..r.order.len()).collect::<Vec<_>>());
        for (i, &w) in r.order.iter().enumerate() {
            prop_assert_eq!(r.rank_of(w), Some(i + 1));
        }
        prop_assert_eq!(fuse_page(&scores, WeightFunction::InvertedDistance).unwrap(), r);
    }

    /// Relabelling writers relabels the fused scores the same way.
    #[test]
    fn fusion_is_permutation_equivariant((n, lines) in line_set(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let scores: Vec<LineScore> = lines.iter().map(|(l, t)| LineScore::from_logliks(l.clone(), *t).unwrap()).collect();
        let permuted: Vec<LineScore> = lines
            .iter()
            .map(|(l, t)| LineScore::from_logliks(perm.iter().map(|&p| l[p]).collect(), *t).unwrap())
            .collect();
        for f in WeightFunction::all() {
            let a = fuse_page(&scores, f).unwrap();
            let b = fuse_page(&permuted, f).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                // Ties may order differently; the scores themselves must agree.
                prop_assert!((b.scores[i] - a.scores[p]).abs() < 1e-9 * (1.0 + a.scores[p].abs()));
            }
        }
    }
}

#[test]
fn ranking_ties_prefer_lower_index() {
    assert_eq!(rank_order(&[1.0, 3.0, 3.0, 0.5]), vec![1, 2, 0, 3]);
    let r = RankedResult::from_scores(vec![2.0, 2.0, 2.0]);
    assert_eq!(r.order, vec![0, 1, 2]);
}

fn small_config(mode: Mode, transform: Option<TransformSpec>) -> ModelConfig {
    ModelConfig {
        mode,
        window: SlidingWindowConfig { orientation_bins: 8, ..Default::default() },
        states: 2,
        mixtures: 2,
        iterations: 2,
        iterations_per_split: 1,
        strips: 4,
        transform,
        transform_iterations: 10,
        seed: 1,
        ..Default::default()
    }
}

fn training_pages(writers: usize, pages: usize) -> Vec<TrainingPage> {
    synthetic_dataset(writers, pages, &SynthPageSpec::default(), 17)
        .unwrap()
        .into_iter()
        .map(|p| TrainingPage { writer: p.writer, image: p.image, line_boxes: p.line_boxes })
        .collect()
}

#[test]
fn registry_round_trips_through_disk() {
    let pages = training_pages(3, 2);
    let tmp = TempDir::new().unwrap();
    let cases = [
        (Mode::Line, None),
        (Mode::Line, Some(TransformSpec { kind: scorewriter::dimred::TransformKind::Pca, dim: 16 })),
        (Mode::BlockLine, Some(TransformSpec { kind: scorewriter::dimred::TransformKind::Fa, dim: 8 })),
    ];
    for (i, (mode, transform)) in cases.into_iter().enumerate() {
        let cfg = small_config(mode, transform);
        let reg = train_writer_models(&pages, &cfg, None).unwrap();
        assert_eq!(reg.writer_ids(), ["w00", "w01", "w02"]);
        assert_eq!(reg.grammar.is_some(), mode == Mode::BlockLine);
        assert_eq!(reg.transform.as_ref().map(|t| t.output_dim()), transform.map(|t| t.dim));
        let dir = tmp.path().join(format!("reg{i}"));
        reg.save(&dir).unwrap();
        let back = Registry::load(&dir).unwrap();
        assert_eq!(back.config, reg.config);
        assert_eq!(back.writers, reg.writers);
        assert_eq!(back.grammar, reg.grammar);
        let page = &pages[1].image;
        let a = identify_page(page, &reg, WeightFunction::InvertedDistance).unwrap();
        let b = identify_page(page, &back, WeightFunction::InvertedDistance).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn tampered_registry_is_refused() {
    let pages = training_pages(2, 2);
    let reg = train_writer_models(&pages, &small_config(Mode::Line, None), None).unwrap();
    let tmp = TempDir::new().unwrap();
    reg.save(tmp.path()).unwrap();
    let cfg_path = tmp.path().join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).unwrap().replace("states = 2", "states = 3");
    std::fs::write(&cfg_path, text).unwrap();
    assert_eq!(Registry::load(tmp.path()).unwrap_err().category(), "config");
}

#[test]
fn training_is_reproducible() {
    let pages = training_pages(2, 2);
    let cfg = small_config(Mode::Line, None);
    let a = train_writer_models(&pages, &cfg, None).unwrap();
    let b = train_writer_models(&pages, &cfg, None).unwrap();
    assert_eq!(a.writers, b.writers);
}

#[test]
fn blank_page_cannot_be_identified() {
    let pages = training_pages(2, 2);
    let reg = train_writer_models(&pages, &small_config(Mode::Line, None), None).unwrap();
    let blank = GrayImage::filled(400, 300, BACKGROUND);
    let err = identify_page(&blank, &reg, WeightFunction::InvertedDistance).unwrap_err();
    assert_eq!(err.category(), "identification");
}

#[test]
fn invalid_configs_are_rejected() {
    let pages = training_pages(1, 1);
    let bad = [
        ModelConfig { states: 0, ..small_config(Mode::Line, None) },
        ModelConfig { strips: 17, ..small_config(Mode::Line, None) },
        small_config(Mode::Line, Some(TransformSpec { kind: scorewriter::dimred::TransformKind::Pca, dim: 1000 })),
    ];
    for cfg in bad {
        assert_eq!(train_writer_models(&pages, &cfg, None).unwrap_err().category(), "config");
    }
    assert!(train_writer_models(&[], &small_config(Mode::Line, None), None).is_err());
}
