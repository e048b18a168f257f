use proptest::prelude::*;
use scorewriter::imgproc::{binarize, load_page, projection, split_strips, Axis, BinaryImage, GrayImage};
use scorewriter::synth::{add_gaussian_noise, generate_page, SynthPageSpec};
use tempfile::TempDir;

fn gray(max_w: usize, max_h: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn mask(max_w: usize, max_h: usize) -> impl Strategy<Value = BinaryImage> {
    (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), w * h).prop_map(move |m| BinaryImage::new(w, h, m).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_conserves_ink(img in gray(40, 40)) {
        let b = binarize(&img);
        prop_assert_eq!(projection(&b, Axis::Horizontal).total(), b.count());
        prop_assert_eq!(projection(&b, Axis::Vertical).total(), b.count());
    }

    #[test]
    fn strips_concatenate_back(img in gray(40, 12), pick in 0usize..1000) {
        let n = 1 + pick % img.width();
        let strips = split_strips(&img, n).unwrap();
        prop_assert_eq!(strips.len(), n);
        prop_assert_eq!(GrayImage::hconcat(&strips).unwrap(), img);
    }

    #[test]
    fn binarizing_a_rendered_mask_is_identity(m in mask(30, 30)) {
        // A single-valued image has no threshold to find; only two-tone masks apply.
        prop_assume!(m.count() > 0 && m.count() < m.width() * m.height());
        prop_assert_eq!(binarize(&m.to_gray()), m);
    }

    #[test]
    fn rotations_are_inverse(img in gray(20, 20)) {
        prop_assert_eq!(img.rotate_ccw().rotate_cw(), img.clone());
        prop_assert_eq!(img.rotate_ccw().rotate_ccw().rotate_ccw().rotate_ccw(), img);
    }
}

#[test]
fn png_and_pgm_round_trip() {
    let tmp = TempDir::new().unwrap();
    let img = GrayImage::from_fn(17, 9, |x, y| (x * 13 + y * 7) as u8);
    let png = tmp.path().join("a.png");
    img.save_png(&png).unwrap();
    assert_eq!(load_page(&png).unwrap(), img);
    let pgm = tmp.path().join("a.pgm");
    std::fs::write(&pgm, img.to_pgm()).unwrap();
    assert_eq!(load_page(&pgm).unwrap(), img);
}

#[test]
fn color_png_reduces_to_luma() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("c.png");
    let rgb = image::RgbImage::from_fn(3, 1, |x, _| match x {
        0 => image::Rgb([255, 0, 0]),
        1 => image::Rgb([0, 255, 0]),
        _ => image::Rgb([0, 0, 255]),
    });
    rgb.save(&path).unwrap();
    assert_eq!(load_page(&path).unwrap().data(), &[76, 150, 29]);
}

#[test]
fn unsupported_format_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("x.gif");
    std::fs::write(&path, b"GIF89a\x04\x00\x04\x00\x00\x00\x00;").unwrap();
    assert_eq!(load_page(&path).unwrap_err().category(), "format");
}

#[test]
fn page_generation_is_deterministic() {
    let spec = SynthPageSpec { style_seed: 4, ..Default::default() };
    let (a, ga) = generate_page(&spec, 99).unwrap();
    let (b, gb) = generate_page(&spec, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(ga, gb);
    let (c, _) = generate_page(&spec, 100).unwrap();
    assert_ne!(a, c);
}

#[test]
fn noise_deviation_grows_with_level() {
    let (clean, _) = generate_page(&SynthPageSpec::default(), 3).unwrap();
    let mut prev = -1.0;
    for level in [0.0, 0.1, 0.2, 0.3] {
        let noisy = add_gaussian_noise(&clean, level, 8).unwrap();
        let mad = clean.data().iter().zip(noisy.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
            / clean.data().len() as f64;
        assert!(mad >= prev, "level {level}: {mad} < {prev}");
        prev = mad;
    }
    assert!(add_gaussian_noise(&clean, 1.5, 0).is_err());
}

#[test]
fn silence_columns_hold_only_staff_ink() {
    for seed in 0..5 {
        let spec = SynthPageSpec { style_seed: seed, ..Default::default() };
        let (_, gt) = generate_page(&spec, seed + 10).unwrap();
        for (line, runs) in gt.line_boxes.iter().zip(&gt.silence) {
            for run in runs {
                for x in run.start..run.end {
                    for y in line.top..=line.bottom {
                        if gt.ink_mask.get(x, y) {
                            assert!(gt.staff_mask.get(x, y), "symbol ink at ({x},{y}) inside silence");
                        }
                    }
                }
            }
        }
    }
}
