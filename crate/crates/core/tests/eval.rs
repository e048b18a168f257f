use proptest::prelude::*;
use scorewriter::eval::{
    confusion_matrix, error_rate, format_manifest, make_folds, parse_manifest, run_benchmark, synthetic_dataset,
    top_n_accuracy, BenchmarkConfig, ManifestEntry, Prediction, Split,
};
use scorewriter::features::SlidingWindowConfig;
use scorewriter::pipeline::ModelConfig;
use scorewriter::synth::SynthPageSpec;

fn page_writers() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(2usize..12, 1..5)
        .prop_map(|counts| counts.iter().enumerate().flat_map(|(w, &n)| vec![format!("w{w}"); n]).collect())
}

fn predictions() -> impl Strategy<Value = (usize, Vec<Prediction>)> {
    (1usize..7).prop_flat_map(|n| {
        let one = (0..n, Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|(truth, ranking)| Prediction { truth, ranking });
        (Just(n), proptest::collection::vec(one, 1..40))
    })
}

proptest! {
    #[test]
    fn every_page_is_tested_exactly_once(writers in page_writers(), folds in 2usize..6, seed in any::<u64>()) {
        let min = writers.iter().fold(std::collections::HashMap::new(), |mut m, w| { *m.entry(w).or_insert(0) += 1; m })
            .into_values().min().unwrap();
        let plan = match make_folds(&writers, folds, seed) {
            Ok(p) => p,
            Err(e) => {
                prop_assert!(min < folds);
                prop_assert_eq!(e.category(), "data");
                return Ok(());
            }
        };
        prop_assert_eq!(&plan, &make_folds(&writers, folds, seed).unwrap());
        for i in 0..writers.len() {
            let tested = (0..folds).filter(|&f| plan.assignments[f][i] == Split::Test).count();
            prop_assert_eq!(tested, 1);
        }
        for f in 0..folds {
            let test = plan.pages(f, Split::Test);
            let val = plan.pages(f, Split::Validation);
            prop_assert!(test.iter().all(|p| !val.contains(p)));
            prop_assert_eq!(val.is_empty(), folds == 2);
            prop_assert!(!plan.pages(f, Split::Train).is_empty() || folds == 2 && min == 2);
            // Per writer, group sizes across folds differ by at most one.
            let mut ws: Vec<&String> = writers.iter().collect();
            ws.sort();
            ws.dedup();
            for w in ws {
                let sizes: Vec<usize> = (0..folds)
                    .map(|g| plan.pages(g, Split::Test).iter().filter(|&&p| &writers[p] == w).count())
                    .collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }
    }

    #[test]
    fn top_n_is_monotone((n, preds) in predictions()) {
        let acc: Vec<f64> = (1..=n).map(|k| top_n_accuracy(&preds, k)).collect();
        prop_assert!(acc.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(acc.iter().all(|a| (0.0..=100.0).contains(a)));
        prop_assert_eq!(acc[n - 1], 100.0);
        let m = confusion_matrix(&preds, n);
        prop_assert_eq!(m.iter().flatten().sum::<usize>(), preds.len());
        for (t, row) in m.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), preds.iter().filter(|p| p.truth == t).count());
        }
        let trace: usize = (0..n).map(|i| m[i][i]).sum();
        prop_assert!((100.0 * trace as f64 / preds.len() as f64 - acc[0]).abs() < 1e-9);
    }

    #[test]
    fn error_rate_matches_its_definition(e in 0.01f64..100.0, o in 0.0f64..100.0) {
        let r = error_rate(e, o).unwrap();
        prop_assert!((r - 100.0 * (e - o) / e).abs() < 1e-9);
        prop_assert_eq!(error_rate(e, e).unwrap(), 0.0);
    }
}

#[test]
fn error_rate_needs_positive_expectation() {
    assert_eq!(error_rate(100.0, 88.65).unwrap(), 11.35);
    assert!(error_rate(0.0, 10.0).is_err());
    assert!(error_rate(-5.0, 10.0).is_err());
    assert!(error_rate(f64::NAN, 10.0).is_err());
}

#[test]
fn single_fold_holds_out_test_and_validation() {
    let writers: Vec<String> = (0..3).flat_map(|w| vec![format!("w{w}"); 10]).collect();
    let plan = make_folds(&writers, 1, 4).unwrap();
    assert_eq!(plan.pages(0, Split::Test).len(), 3);
    assert_eq!(plan.pages(0, Split::Validation).len(), 3);
    assert_eq!(plan.pages(0, Split::Train).len(), 24);
    let short: Vec<String> = vec!["a".into(), "a".into()];
    assert_eq!(make_folds(&short, 1, 0).unwrap_err().category(), "data");
    assert!(make_folds(&writers, 0, 0).is_err());
}

#[test]
fn missing_writer_in_ranking_has_no_rank() {
    let p = Prediction { truth: 2, ranking: vec![0, 1] };
    assert_eq!(p.rank(), usize::MAX);
    assert_eq!(top_n_accuracy(&[p], 5), 0.0);
    assert_eq!(top_n_accuracy(&[], 1), 0.0);
}

#[test]
fn manifest_round_trips() {
    let entries = vec![
        ManifestEntry { writer: "w-01".into(), page: "p1".into(), path: "a/p1.png".into() },
        ManifestEntry { writer: "w-02".into(), page: "p 2".into(), path: "/abs/b.pgm".into() },
    ];
    let text = format_manifest(&entries);
    assert_eq!(parse_manifest(&text).unwrap(), entries);
    assert_eq!(parse_manifest("# comment\n\n").unwrap(), Vec::new());
    assert_eq!(parse_manifest("only\ttwo\n").unwrap_err().category(), "format");
}

#[test]
fn small_benchmark_report_is_consistent() {
    let data = synthetic_dataset(3, 3, &SynthPageSpec::default(), 5).unwrap();
    let model = ModelConfig {
        window: SlidingWindowConfig { orientation_bins: 8, ..Default::default() },
        states: 2,
        mixtures: 2,
        iterations: 2,
        iterations_per_split: 1,
        ..Default::default()
    };
    let cfg = BenchmarkConfig { folds: 3, seed: 1, grid: vec![model.clone(), ModelConfig { mixtures: 1, ..model }], ..Default::default() };
    let r = run_benchmark(&data, &cfg).unwrap();
    assert_eq!(r.writers.len(), 3);
    assert_eq!(r.folds.len(), 3);
    assert_eq!(r.page_predictions.len(), 9);
    assert_eq!(r.top_n.len(), 3);
    assert!(r.top_n.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(r.top_n[2], 100.0);
    assert_eq!(r.top_n[0], r.page_accuracy);
    for a in [r.unit_accuracy, r.page_accuracy].iter().chain(&r.page_accuracy_by_weighting) {
        assert!((0.0..=100.0).contains(a));
    }
    for f in &r.folds {
        assert!(f.selected < 2);
        assert_eq!(f.test_pages, 3);
    }
    assert!(r.timings.total_s >= r.timings.train_s);
    let again = run_benchmark(&data, &cfg).unwrap();
    assert_eq!(r.render(), again.render());
}
