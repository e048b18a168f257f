//! `scorewriter`: batch front end for writer identification on music scores.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use scorewriter::eval::{
    degrade_dataset, format_manifest, load_dataset, parse_manifest, run_benchmark, sidecar_path, synthetic_corpus,
    synthetic_dataset, BenchmarkConfig, DatasetPage, ManifestEntry,
};
use scorewriter::features::{detect_silence, sliding_lgh};
use scorewriter::imgproc::{binarize, load_page};
use scorewriter::pipeline::{
    format_page_result, identify_page, page_units, train_writer_models, ModelConfig, Registry, TrainingPage,
};
use scorewriter::segmentation::{format_boxes, BoxSource};
use scorewriter::seqmodel::FillerGrammar;
use scorewriter::{Error, Result};

use config::{ModelFlags, Resolved, CONFIG_ENV};

const IMAGE_EXTENSIONS: [&str; 7] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp", "pgm"];

#[derive(Debug, Parser)]
#[command(name = "scorewriter", version, about = "Writer identification for handwritten music scores")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render synthetic writers' pages with ground-truth sidecars and a manifest.
    Synth(SynthArgs),
    /// Detect score-lines (or block-lines) on pages.
    Segment(SegmentArgs),
    /// Write the feature sequence of every unit of a page.
    Extract(ExtractArgs),
    /// Train one model per writer from a manifest.
    Train(TrainArgs),
    /// Rank the registry's writers for each page.
    Identify(IdentifyArgs),
    /// Cross-validated benchmark on a manifest or a synthetic corpus.
    Evaluate(EvaluateArgs),
    /// Build a manifest from a directory of writer folders.
    ImportMuscima(ImportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    writers: Option<usize>,
    #[arg(long)]
    pages: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    lines_per_page: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    curvature_amplitude: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    pages: Vec<PathBuf>,
    /// Take the configuration and grammar from a trained registry.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Filler grammar file for block-line mode.
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Write boxes here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    page: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Registry directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    pages: Vec<PathBuf>,
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    weighting: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Dataset manifest; omit to evaluate on a synthetic corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated mixture counts for validation-split selection.
    #[arg(long, value_delimiter = ',')]
    grid_mixtures: Option<Vec<usize>>,
    #[arg(long)]
    weighting: Option<String>,
    /// Gaussian noise added to every page before evaluation.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    writers: Option<usize>,
    #[arg(long)]
    pages: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct ImportArgs {
    /// Directory with one sub-directory of page images per writer.
    root: PathBuf,
    /// Manifest file to write.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.split_once(": ").map_or(msg.as_str(), |(_, rest)| rest);
            eprintln!("error[{}]: {}", e.category(), msg.lines().next().unwrap_or(""));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Argument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    }
    let no_flags = ModelFlags::default();
    let model_flags = match &cli.command {
        Command::Segment(a) => &a.model,
        Command::Extract(a) => &a.model,
        Command::Train(a) => &a.model,
        Command::Identify(a) => &a.model,
        Command::Evaluate(a) => &a.model,
        Command::Synth(_) | Command::ImportMuscima(_) => &no_flags,
    };
    let cfg = config::resolve(cli.config.as_ref(), cli.seed, model_flags)?;
    info!("config digest {}", cfg.digest());
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, cfg),
        Command::Segment(a) => cmd_segment(a, &cfg),
        Command::Extract(a) => cmd_extract(a, &cfg),
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Identify(a) => cmd_identify(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, cfg),
        Command::ImportMuscima(a) => cmd_import(a, &cfg),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Vec<DatasetPage>> {
    let text = fs::read_to_string(path).map_err(Error::io_at(path))?;
    let entries = parse_manifest(&text)?;
    if entries.is_empty() {
        return Err(Error::Data(format!("{}: manifest lists no pages", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    load_dataset(&entries, base)
}

fn cmd_synth(a: &SynthArgs, mut cfg: Resolved) -> Result<()> {
    let s = &mut cfg.run.synth;
    if let Some(v) = a.writers {
        s.writers = v;
    }
    if let Some(v) = a.pages {
        s.pages = v;
    }
    if let Some(v) = a.noise {
        s.noise = v;
    }
    if let Some(v) = a.lines_per_page {
        s.page.lines_per_page = v;
    }
    if let Some(v) = a.width {
        s.page.width = v;
    }
    if let Some(v) = a.height {
        s.page.height = v;
    }
    if let Some(v) = a.curvature_amplitude {
        s.page.curvature_amplitude = v;
    }
    if s.writers == 0 || s.pages == 0 {
        return Err(Error::Argument("writers and pages must be positive".into()));
    }
    let digest = cfg.digest();
    let s = &cfg.run.synth;
    let (pages, truths): (Vec<DatasetPage>, Vec<_>) =
        synthetic_corpus(s.writers, s.pages, &s.page, cfg.run.seed)?.into_iter().unzip();
    let pages = if s.noise > 0.0 { degrade_dataset(&pages, s.noise, cfg.run.seed)? } else { pages };
    let mut entries = Vec::with_capacity(pages.len());
    for (page, truth) in pages.iter().zip(&truths) {
        let rel = PathBuf::from(&page.writer).join(format!("{}.png", page.page));
        let path = a.out.join(&rel);
        fs::create_dir_all(path.parent().expect("page path has a writer folder"))?;
        page.image.save_png(&path)?;
        fs::write(sidecar_path(&path), format!("# config {digest}\n{}", truth.to_sidecar()))?;
        entries.push(ManifestEntry { writer: page.writer.clone(), page: page.page.clone(), path: rel });
    }
    fs::write(a.out.join("manifest.tsv"), format!("# config {digest}\n{}", format_manifest(&entries)))?;
    info!("wrote {} pages to {}", entries.len(), a.out.display());
    Ok(())
}

/// Model configuration and grammar for segmentation-type commands.
fn unit_setup(registry: Option<&PathBuf>, grammar: Option<&PathBuf>, cfg: &Resolved) -> Result<(ModelConfig, Option<FillerGrammar>)> {
    let (model, mut g) = match registry {
        Some(dir) => {
            let reg = Registry::load(dir)?;
            check_digest(&reg, cfg)?;
            (reg.config, reg.grammar)
        }
        None => (cfg.run.model.clone(), None),
    };
    if let Some(path) = grammar {
        g = Some(FillerGrammar::from_bytes(&fs::read(path).map_err(Error::io_at(path))?)?);
    }
    Ok((model, g))
}

/// Inference settings given explicitly must match those the registry was
/// trained with. The seed is not compared: inference draws no random numbers.
fn check_digest(reg: &Registry, cfg: &Resolved) -> Result<()> {
    if !cfg.model_explicit {
        return Ok(());
    }
    let requested = ModelConfig { seed: reg.config.seed, ..cfg.run.model.clone() };
    if requested.digest() != reg.config.digest() {
        return Err(Error::Config(format!(
            "requested model config {} differs from registry config {}",
            requested.digest(),
            reg.config.digest()
        )));
    }
    Ok(())
}

fn cmd_segment(a: &SegmentArgs, cfg: &Resolved) -> Result<()> {
    if a.pages.is_empty() {
        return Err(Error::Argument("no pages given".into()));
    }
    let (model, grammar) = unit_setup(a.registry.as_ref(), a.grammar.as_ref(), cfg)?;
    let mut out = format!("# config {}\n", cfg.digest());
    for path in &a.pages {
        let page = load_page(path)?;
        let boxes = page_units(&page, &model, grammar.as_ref())?;
        let _ = writeln!(out, "file {}", path.display());
        out.push_str(&format_boxes(&boxes));
    }
    write_output(a.out.as_deref(), &out)
}

fn cmd_extract(a: &ExtractArgs, cfg: &Resolved) -> Result<()> {
    let (model, grammar) = unit_setup(a.registry.as_ref(), a.grammar.as_ref(), cfg)?;
    let page = load_page(&a.page)?;
    let boxes = page_units(&page, &model, grammar.as_ref())?;
    fs::create_dir_all(&a.out)?;
    let mut index = format!("# config {}\n# unit\tsource\ttop\tbottom\tframes\tfile\n", cfg.digest());
    for (i, b) in boxes.iter().enumerate() {
        let img = b.crop(&page)?;
        let mut seq = sliding_lgh(&img, &model.window)?;
        if model.drop_silence {
            seq = seq.select(&detect_silence(&binarize(&img), &seq, model.staff_lines).keep());
        }
        let file = format!("unit_{i:03}.fseq");
        seq.write_file(a.out.join(&file))?;
        let source = match b.source {
            BoxSource::Page => "page".to_string(),
            BoxSource::Strip { index, .. } => format!("strip{index}"),
        };
        let _ = writeln!(index, "{i}\t{source}\t{}\t{}\t{}\t{file}", b.top, b.bottom, seq.len());
    }
    fs::write(a.out.join("units.tsv"), index)?;
    info!("extracted {} units", boxes.len());
    Ok(())
}

fn cmd_train(a: &TrainArgs, cfg: &Resolved) -> Result<()> {
    let data = read_manifest(&a.manifest)?;
    let pages: Vec<TrainingPage> = data
        .into_iter()
        .map(|p| TrainingPage { writer: p.writer, image: p.image, line_boxes: p.line_boxes })
        .collect();
    let t = Instant::now();
    let registry = train_writer_models(&pages, &cfg.run.model, None)?;
    registry.save(&a.out)?;
    info!("trained {} writers in {:.1}s", registry.writers.len(), t.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_identify(a: &IdentifyArgs, cfg: &Resolved) -> Result<()> {
    if a.pages.is_empty() {
        return Err(Error::Argument("no pages given".into()));
    }
    let registry = Registry::load(&a.registry)?;
    check_digest(&registry, cfg)?;
    let weighting = match &a.weighting {
        Some(w) => w.parse()?,
        None => cfg.weighting()?,
    };
    let mut out = String::new();
    for path in &a.pages {
        let page = load_page(path)?;
        let result = identify_page(&page, &registry, weighting)?;
        let _ = writeln!(out, "file {}", path.display());
        out.push_str(&format_page_result(&result, &registry, weighting));
    }
    write_output(a.out.as_deref(), &out)
}

fn cmd_evaluate(a: &EvaluateArgs, mut cfg: Resolved) -> Result<()> {
    let run = &mut cfg.run;
    if let Some(f) = a.folds {
        run.evaluate.folds = f;
    }
    if let Some(g) = &a.grid_mixtures {
        run.evaluate.grid_mixtures = g.clone();
    }
    if let Some(w) = &a.weighting {
        w.parse::<scorewriter::pipeline::WeightFunction>()?;
        run.weighting = w.clone();
    }
    if let Some(n) = a.noise {
        run.synth.noise = n;
    }
    if let Some(n) = a.writers {
        run.synth.writers = n;
    }
    if let Some(n) = a.pages {
        run.synth.pages = n;
    }
    let digest = cfg.digest();
    let run = &cfg.run;
    let t = Instant::now();
    let data = match &a.manifest {
        Some(m) => read_manifest(m)?,
        None => synthetic_dataset(run.synth.writers, run.synth.pages, &run.synth.page, run.seed)?,
    };
    let data = if run.synth.noise > 0.0 { degrade_dataset(&data, run.synth.noise, run.seed)? } else { data };
    let mixtures = if run.evaluate.grid_mixtures.is_empty() { vec![run.model.mixtures] } else { run.evaluate.grid_mixtures.clone() };
    let grid = mixtures.into_iter().map(|m| ModelConfig { mixtures: m, ..run.model.clone() }).collect();
    let bench = BenchmarkConfig { folds: run.evaluate.folds, seed: run.seed, weighting: cfg.weighting()?, grid };
    let report = run_benchmark(&data, &bench)?;
    eprint!("{}", report.render_timings());
    info!("evaluation took {:.1}s", t.elapsed().as_secs_f64());
    write_output(a.out.as_deref(), &format!("config {digest}\n{}", report.render()))
}

fn cmd_import(a: &ImportArgs, cfg: &Resolved) -> Result<()> {
    let root = a
        .root
        .canonicalize()
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.root.display()))))?;
    let mut writers: Vec<PathBuf> = fs::read_dir(&root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    writers.sort();
    let mut entries = Vec::new();
    for dir in writers {
        let writer = dir.file_name().expect("directory entries have names").to_string_lossy().into_owned();
        let mut images = Vec::new();
        collect_images(&dir, &mut images)?;
        images.sort();
        for path in images {
            let rel = path.strip_prefix(&dir).expect("image lies under its writer folder").with_extension("");
            let page = rel.to_string_lossy().replace(std::path::MAIN_SEPARATOR, "_");
            entries.push(ManifestEntry { writer: writer.clone(), page, path });
        }
    }
    if entries.is_empty() {
        return Err(Error::Data(format!("no page images under writer folders of {}", root.display())));
    }
    write_output(Some(&a.out), &format!("# config {}\n{}", cfg.digest(), format_manifest(&entries)))?;
    info!("imported {} pages", entries.len());
    Ok(())
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        {
            out.push(path);
        }
    }
    Ok(())
}
