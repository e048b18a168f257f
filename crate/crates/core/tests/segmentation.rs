use scorewriter::features::SlidingWindowConfig;
use scorewriter::segmentation::{
    format_boxes, segment_lines_projection, segment_page_blocks, train_filler_grammar, zone_training_set,
    AnnotatedPage, BoxSource, GrammarConfig, LineBox, ProjectionConfig,
};
use scorewriter::synth::{add_gaussian_noise, generate_page, SynthPageSpec};

fn page_spec(style: u64, lines: usize) -> SynthPageSpec {
    let base = SynthPageSpec { style_seed: style, lines_per_page: lines, ..Default::default() };
    SynthPageSpec { height: base.required_height(60).max(base.height), ..base }
}

#[test]
fn projection_recovers_line_count() {
    for style in 0..6 {
        for lines in 1..=4 {
            let spec = page_spec(style, lines);
            let (img, gt) = generate_page(&spec, style * 10 + lines as u64).unwrap();
            let boxes = segment_lines_projection(&img, &ProjectionConfig::default());
            assert_eq!(boxes.len(), gt.line_boxes.len(), "style {style}, {lines} lines: {boxes:?}");
            for (b, t) in boxes.iter().zip(&gt.line_boxes) {
                let centre = (t.top + t.bottom) / 2;
                assert!(b.top <= centre && centre <= b.bottom, "{b:?} misses {t:?}");
                assert_eq!(b.source, BoxSource::Page);
            }
            assert!(boxes.windows(2).all(|w| w[0].bottom < w[1].top));
        }
    }
}

#[test]
fn projection_survives_moderate_noise() {
    let (img, gt) = generate_page(&page_spec(2, 3), 5).unwrap();
    for (i, level) in [0.1, 0.2].into_iter().enumerate() {
        let noisy = add_gaussian_noise(&img, level, i as u64).unwrap();
        let boxes = segment_lines_projection(&noisy, &ProjectionConfig::default());
        assert_eq!(boxes.len(), gt.line_boxes.len(), "noise {level}");
    }
}

#[test]
fn blank_page_has_no_lines() {
    let spec = SynthPageSpec { lines_per_page: 0, ..Default::default() };
    let (img, _) = generate_page(&spec, 0).unwrap();
    assert!(segment_lines_projection(&img, &ProjectionConfig::default()).is_empty());
}

#[test]
fn block_lines_are_sorted_and_disjoint_per_strip() {
    let window = SlidingWindowConfig { orientation_bins: 8, ..Default::default() };
    let strips = 4;
    let train: Vec<AnnotatedPage> = (0..4)
        .map(|i| {
            let (img, gt) = generate_page(&page_spec(i, 3), 100 + i).unwrap();
            AnnotatedPage::from_synth(img, &gt, strips).unwrap()
        })
        .collect();
    let set = zone_training_set(&train, strips, &window).unwrap();
    let grammar = train_filler_grammar(&set, &GrammarConfig::default()).unwrap();

    for (seed, noise) in [(7u64, 0.0), (8, 0.1)] {
        let (img, gt) = generate_page(&page_spec(1, 3), seed).unwrap();
        let img = add_gaussian_noise(&img, noise, seed).unwrap();
        let boxes = segment_page_blocks(&img, strips, &grammar, &window).unwrap();
        assert!(!boxes.is_empty());
        let mut per_strip: Vec<Vec<LineBox>> = vec![Vec::new(); strips];
        for b in &boxes {
            match b.source {
                BoxSource::Strip { index, start, end } => {
                    assert!(start < end && end <= img.width());
                    per_strip[index].push(*b);
                }
                BoxSource::Page => panic!("block-line box without strip"),
            }
        }
        for s in &per_strip {
            assert!(s.windows(2).all(|w| w[0].bottom < w[1].top), "{s:?}");
        }
        if noise == 0.0 {
            let exact = per_strip.iter().filter(|s| s.len() == gt.line_boxes.len()).count();
            assert!(exact * 4 >= strips * 3, "zone counts {:?}", per_strip.iter().map(Vec::len).collect::<Vec<_>>());
        }
    }
}

#[test]
fn box_text_format() {
    let boxes = [
        LineBox { top: 3, bottom: 40, source: BoxSource::Page },
        LineBox { top: 5, bottom: 9, source: BoxSource::Strip { index: 2, start: 100, end: 200 } },
    ];
    assert_eq!(format_boxes(&boxes), "page score 3 40\nstrip 2 score 5 9\n");
}
