//! Tool-wide run configuration: a TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use scorewriter::digest::config_digest;
use scorewriter::pipeline::{Mode, ModelConfig, TransformSpec, WeightFunction};
use scorewriter::synth::SynthPageSpec;
use scorewriter::{Error, Result};

pub const CONFIG_ENV: &str = "SCOREWRITER_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub weighting: String,
    pub model: ModelConfig,
    pub synth: SynthSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            weighting: WeightFunction::default().to_string(),
            model: ModelConfig::default(),
            synth: SynthSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub writers: usize,
    pub pages: usize,
    pub noise: f64,
    pub page: SynthPageSpec,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { writers: 5, pages: 10, noise: 0.0, page: SynthPageSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub folds: usize,
    /// Mixture counts tried on the validation split; empty means
    /// `model.mixtures` only.
    pub grid_mixtures: Vec<usize>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { folds: 10, grid_mixtures: Vec::new() }
    }
}

/// Flags for the `model` table, named after its keys.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub window_width: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub orientation_bins: Option<usize>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub mixtures: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub iterations_per_split: Option<usize>,
    #[arg(long)]
    pub drop_silence: Option<bool>,
    #[arg(long)]
    pub staff_lines: Option<usize>,
    /// `fa:<dim>`, `pca:<dim>`, `lda:<dim>` or `none`.
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long)]
    pub transform_iterations: Option<usize>,
    #[arg(long)]
    pub strips: Option<usize>,
}

impl ModelFlags {
    pub fn any(&self) -> bool {
        let ModelFlags {
            mode,
            window_width,
            overlap,
            orientation_bins,
            states,
            mixtures,
            iterations,
            iterations_per_split,
            drop_silence,
            staff_lines,
            transform,
            transform_iterations,
            strips,
        } = self;
        mode.is_some()
            || window_width.is_some()
            || overlap.is_some()
            || orientation_bins.is_some()
            || states.is_some()
            || mixtures.is_some()
            || iterations.is_some()
            || iterations_per_split.is_some()
            || drop_silence.is_some()
            || staff_lines.is_some()
            || transform.is_some()
            || transform_iterations.is_some()
            || strips.is_some()
    }

    pub fn apply(&self, m: &mut ModelConfig) -> Result<()> {
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    m.$($field).+ = v;
                }
            };
        }
        set!(mode => mode);
        set!(window_width => window.window_width);
        set!(overlap => window.overlap);
        set!(orientation_bins => window.orientation_bins);
        set!(states => states);
        set!(mixtures => mixtures);
        set!(iterations => iterations);
        set!(iterations_per_split => iterations_per_split);
        set!(drop_silence => drop_silence);
        set!(transform_iterations => transform_iterations);
        set!(strips => strips);
        if let Some(n) = self.staff_lines {
            m.staff_lines = n;
            m.projection.staff_lines = n;
        }
        if let Some(t) = &self.transform {
            m.transform = if t == "none" { None } else { Some(t.parse::<TransformSpec>()?) };
        }
        Ok(())
    }
}

/// A resolved configuration and whether it pinned any model settings
/// explicitly (through the file or flags).
pub struct Resolved {
    pub run: RunConfig,
    pub model_explicit: bool,
}

impl Resolved {
    pub fn digest(&self) -> String {
        config_digest(&self.run)
    }

    pub fn weighting(&self) -> Result<WeightFunction> {
        self.run.weighting.parse()
    }
}

pub fn load(path: Option<&Path>) -> Result<(RunConfig, bool)> {
    let Some(path) = path else {
        return Ok((RunConfig::default(), false));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    let value: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let has_model = value.contains_key("model");
    let run: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    Ok((run, has_model))
}

pub fn resolve(path: Option<&PathBuf>, seed: Option<u64>, model: &ModelFlags) -> Result<Resolved> {
    let (mut run, has_model) = load(path.map(PathBuf::as_path))?;
    if let Some(s) = seed {
        run.seed = s;
    }
    model.apply(&mut run.model)?;
    run.model.seed = run.seed;
    run.model.validate()?;
    run.weighting.parse::<WeightFunction>()?;
    Ok(Resolved { run, model_explicit: has_model || model.any() })
}
