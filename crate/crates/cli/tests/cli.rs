use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scorewriter"));
    c.env_remove("SCOREWRITER_CONFIG").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_MODEL: [&str; 6] = ["--mixtures", "2", "--iterations", "2", "--orientation-bins", "8"];

fn synth(dir: &Path, writers: &str, pages: &str) {
    ok(&["synth", "--out", p(dir), "--writers", writers, "--pages", pages, "--seed", "11"]);
}

#[test]
fn synth_writes_pages_sidecars_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2", "3");
    let manifest = fs::read_to_string(data.join("manifest.tsv")).unwrap();
    let entries = scorewriter::eval::parse_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 6);
    assert!(manifest.starts_with("# config "));
    for e in &entries {
        let page = data.join(&e.path);
        assert!(page.exists());
        let side = fs::read_to_string(scorewriter::eval::sidecar_path(&page)).unwrap();
        let lines = scorewriter::synth::parse_sidecar(&side).unwrap();
        assert_eq!(lines.len(), 3);
    }
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "2", "2");
    synth(&b, "2", "2");
    for rel in ["manifest.tsv", "w00/p00.png", "w01/p01.png", "w01/p01.gt.txt"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn segment_finds_every_line() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "1", "1");
    let out = ok(&["segment", p(&data.join("w00/p00.png"))]);
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("page score")).count(), 3, "{text}");
}

#[test]
fn extract_writes_feature_files() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let ext = tmp.path().join("ext");
    synth(&data, "1", "1");
    ok(&["extract", p(&data.join("w00/p00.png")), "--out", p(&ext), "--orientation-bins", "8"]);
    let index = fs::read_to_string(ext.join("units.tsv")).unwrap();
    let rows: Vec<&str> = index.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cols: Vec<&str> = row.split('\t').collect();
        let seq = scorewriter::features::FeatureSequence::read_file(ext.join(cols[5])).unwrap();
        assert_eq!(seq.dim(), 4 * 4 * 8);
        assert_eq!(seq.len().to_string(), cols[4]);
    }
}

#[test]
fn single_writer_registry_gives_probability_one() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let reg = tmp.path().join("reg");
    synth(&data, "1", "2");
    let manifest = data.join("manifest.tsv");
    let mut args = vec!["train", "--manifest", p(&manifest), "--out", p(&reg)];
    args.extend(SMALL_MODEL);
    ok(&args);
    let out = ok(&["identify", "--registry", p(&reg), p(&data.join("w00/p01.png"))]);
    let text = stdout(&out);
    assert!(text.contains("winner w00"), "{text}");
    for line in text.lines().filter(|l| l.starts_with("unit ")) {
        assert!(line.ends_with("prob 1.000000"), "{line}");
    }
}

#[test]
fn train_identify_and_digest_mismatch() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let reg = tmp.path().join("reg");
    synth(&data, "3", "2");
    let manifest = data.join("manifest.tsv");
    let mut args = vec!["train", "--manifest", p(&manifest), "--out", p(&reg)];
    args.extend(SMALL_MODEL);
    ok(&args);
    assert!(reg.join("registry.tsv").exists());

    let page = data.join("w02/p01.png");
    let out = ok(&["identify", "--registry", p(&reg), p(&page)]);
    let ranks = stdout(&out).lines().filter(|l| l.starts_with("rank ")).count();
    assert_eq!(ranks, 3);

    // Matching explicit settings pass; different ones are refused.
    let mut same = vec!["identify", "--registry", p(&reg), p(&page)];
    same.extend(SMALL_MODEL);
    ok(&same);
    let out = run(&["identify", "--registry", p(&reg), p(&page), "--states", "2"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error[config]"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn evaluate_is_reproducible_and_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "4");
    let manifest = data.join("manifest.tsv");
    let report = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let mut args = vec!["evaluate", "--manifest", p(&manifest), "--folds", "2", "--seed", "3", "--jobs", jobs, "--out", p(&out)];
        args.extend(SMALL_MODEL);
        ok(&args);
        fs::read_to_string(out).unwrap()
    };
    let a = report("a.txt", "1");
    let b = report("b.txt", "1");
    let c = report("c.txt", "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.contains("page_top_n "));
    let top: Vec<f64> = a
        .lines()
        .find(|l| l.starts_with("page_top_n "))
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(top.len(), 3);
    assert!(top.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*top.last().unwrap(), 100.0);
}

#[test]
fn config_file_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 9\n[synth]\nwriters = 1\npages = 2\n").unwrap();
    let data = tmp.path().join("data");
    let out = bin().args(["synth", "--out", p(&data)]).env("SCOREWRITER_CONFIG", &cfg).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(data.join("manifest.tsv")).unwrap();
    assert_eq!(scorewriter::eval::parse_manifest(&manifest).unwrap().len(), 2);

    // Flags beat the file.
    let more = tmp.path().join("more");
    let out = bin().args(["synth", "--out", p(&more), "--pages", "3"]).env("SCOREWRITER_CONFIG", &cfg).output().unwrap();
    assert!(out.status.success());
    let manifest = fs::read_to_string(more.join("manifest.tsv")).unwrap();
    assert_eq!(scorewriter::eval::parse_manifest(&manifest).unwrap().len(), 3);

    fs::write(&cfg, "sead = 9\n").unwrap();
    let out = bin().args(["segment", "x.png"]).env("SCOREWRITER_CONFIG", &cfg).output().unwrap();
    assert!(stderr(&out).starts_with("error[config]"), "{}", stderr(&out));
}

#[test]
fn diagnostics_are_one_line_with_category() {
    let out = run(&["identify", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[usage]"));

    let tmp = TempDir::new().unwrap();
    let out = run(&["segment", p(&tmp.path().join("missing.png"))]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error[io]"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let out = run(&["train", "--manifest", p(&tmp.path().join("none.tsv")), "--out", p(tmp.path())]);
    assert!(stderr(&out).starts_with("error[io]"));
}

#[test]
fn import_builds_manifest_from_writer_folders() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2", "2");
    let root = tmp.path().join("muscima");
    for (w, dir) in [("w00", "w-01"), ("w01", "w-02")] {
        let target = root.join(dir).join("image");
        fs::create_dir_all(&target).unwrap();
        for page in ["p00", "p01"] {
            fs::copy(data.join(w).join(format!("{page}.png")), target.join(format!("{page}.png"))).unwrap();
        }
    }
    fs::write(root.join("README.txt"), "not a writer").unwrap();
    let manifest = tmp.path().join("m.tsv");
    ok(&["import-muscima", p(&root), "--out", p(&manifest)]);
    let entries = scorewriter::eval::parse_manifest(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let ids: Vec<(&str, &str)> = entries.iter().map(|e| (e.writer.as_str(), e.page.as_str())).collect();
    assert_eq!(ids, [("w-01", "image_p00"), ("w-01", "image_p01"), ("w-02", "image_p00"), ("w-02", "image_p01")]);
    assert!(entries.iter().all(|e| e.path.is_absolute() && e.path.exists()));
}
