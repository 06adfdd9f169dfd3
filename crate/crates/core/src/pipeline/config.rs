use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::align::{AlignmentParams, DEFAULT_RESAMPLES, DEFAULT_SAMPLE_SIZES, DEFAULT_THRESHOLD};
use crate::annotate::GenerationConfig;
use crate::corpus::{Format, SplitRatios};
use crate::error::{Error, Result};
use crate::modeling::{Technique, TechniqueConfig};
use crate::persona::{bundled_personas, bundled_template, PersonaSpec, PromptTemplate};

/// Prefix selecting a persona set or template shipped with the library.
pub const BUNDLED_PREFIX: &str = "bundled:";

/// Whole-pipeline configuration, read from one TOML file. Relative paths
/// resolve against the directory holding the file. Every seeded component
/// derives its seed from `seed`; per-section `seed` keys are offsets.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub dataset: DatasetSection,
    pub personas: PersonaSection,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default = "default_grid")]
    pub techniques: Vec<TechniqueConfig>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub align: AlignSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid() -> Vec<TechniqueConfig> {
    Technique::ALL.into_iter().map(TechniqueConfig::new).collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<String>,
    /// Used only when the dataset carries no split tags.
    #[serde(default = "default_ratios")]
    pub split_ratios: [f64; 3],
}

fn default_ratios() -> [f64; 3] {
    [0.7, 0.1, 0.2]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaSection {
    /// Persona JSONL path or `bundled:<name>`.
    pub path: String,
    /// Template path or `bundled:<name>`.
    pub template: String,
    /// Replaces the hate target phrase of the bundled HS templates.
    #[serde(default)]
    pub hate_target: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Openai,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub api_base: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    /// Response cache directory; defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub mock: MockSection,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self { kind: BackendKind::Mock, api_base: None, model: None, timeout_secs: 60, cache_dir: None, mock: MockSection::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockSection {
    pub persona_spread: f64,
    pub gain: f64,
    pub failure_rate: f64,
    pub persona_seeds: BTreeMap<String, u64>,
}

impl Default for MockSection {
    fn default() -> Self {
        let m = crate::annotate::MockBackend::new();
        Self { persona_spread: m.persona_spread(), gain: m.gain(), failure_rate: 0.0, persona_seeds: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    Hashing,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub seed: u64,
    pub api_base: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::Hashing,
            dim: crate::embed::DEFAULT_DIM,
            seed: 0,
            api_base: None,
            model: None,
            timeout_secs: 60,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// LLM temperatures trained on and searched for the best dev macro-F1.
    pub selection_temperatures: Vec<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { selection_temperatures: vec![0.0, 0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignSection {
    pub sample_sizes: Vec<usize>,
    pub resamples: usize,
    pub threshold: f64,
    /// Temperature of the persona bundle; defaults to the lowest swept one.
    pub temperature: Option<f64>,
    /// Persona id → human id for cross-evaluation; positional by default.
    pub correspondence: Option<BTreeMap<String, String>>,
}

impl Default for AlignSection {
    fn default() -> Self {
        Self {
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            resamples: DEFAULT_RESAMPLES,
            threshold: DEFAULT_THRESHOLD,
            temperature: None,
            correspondence: None,
        }
    }
}

fn toml_error(e: toml::de::Error) -> Error {
    let message = e.message().trim().to_string();
    let field = e
        .span()
        .map(|s| format!("bytes {}..{}", s.start, s.end))
        .unwrap_or_else(|| "config".to_string());
    Error::config(field, message)
}

impl PipelineConfig {
    pub fn from_toml(src: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: PipelineConfig = toml::from_str(src).map_err(toml_error)?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&src, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        match &self.backend.cache_dir {
            Some(dir) => self.resolve(dir),
            None => self.out_dir().join("cache"),
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.dataset.path)
    }

    pub fn dataset_format(&self) -> Result<Format> {
        match &self.dataset.format {
            Some(f) => Format::parse(f).ok_or_else(|| Error::config("dataset.format", format!("unknown format {f:?}"))),
            None => Format::from_path(&self.dataset_path())
                .ok_or_else(|| Error::config("dataset.format", "cannot infer format from the file extension")),
        }
    }

    pub fn split_ratios(&self) -> Result<SplitRatios> {
        let [a, b, c] = self.dataset.split_ratios;
        SplitRatios::new(a, b, c).map_err(|e| Error::config("dataset.split_ratios", e.to_string()))
    }

    pub fn persona_set(&self) -> Result<Vec<PersonaSpec>> {
        match self.personas.path.strip_prefix(BUNDLED_PREFIX) {
            Some(name) => bundled_personas(name)
                .ok_or_else(|| Error::config("personas.path", format!("no bundled persona set named {name:?}"))),
            None => crate::persona::load_personas(self.resolve(Path::new(&self.personas.path))),
        }
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        let template = match self.personas.template.strip_prefix(BUNDLED_PREFIX) {
            Some(name) => bundled_template(name)
                .ok_or_else(|| Error::config("personas.template", format!("no bundled template named {name:?}")))?,
            None => PromptTemplate::load(self.resolve(Path::new(&self.personas.template)))?,
        };
        match &self.personas.hate_target {
            Some(target) => template.with_hate_target(target),
            None => Ok(template),
        }
    }

    /// Generation settings with the global seed applied.
    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig { seed: self.seed.wrapping_add(self.generation.seed), ..self.generation.clone() }
    }

    /// Technique grid with the global seed applied.
    pub fn technique_grid(&self) -> Vec<TechniqueConfig> {
        self.techniques.iter().map(|t| TechniqueConfig { seed: self.seed.wrapping_add(t.seed), ..t.clone() }).collect()
    }

    pub fn alignment_params(&self) -> AlignmentParams {
        AlignmentParams { sample_sizes: self.align.sample_sizes.clone(), resamples: self.align.resamples, seed: self.seed }
    }

    /// Checks that do not depend on which command runs.
    pub fn validate(&self) -> Result<()> {
        let dataset = self.dataset_path();
        if !dataset.is_file() {
            return Err(Error::config("dataset.path", format!("{} does not exist", dataset.display())));
        }
        self.dataset_format()?;
        self.split_ratios()?;
        for (field, value) in [("personas.path", &self.personas.path), ("personas.template", &self.personas.template)] {
            if value.strip_prefix(BUNDLED_PREFIX).is_none() && !self.resolve(Path::new(value)).is_file() {
                return Err(Error::config(field, format!("{value} does not exist")));
            }
        }
        self.persona_set()?;
        self.template()?;
        self.generation.validate()?;
        if self.techniques.is_empty() {
            return Err(Error::config("techniques", "technique grid is empty"));
        }
        for t in &self.techniques {
            t.validate()?;
        }
        for &t in &self.train.selection_temperatures {
            if !self.generation.temperatures.contains(&t) {
                return Err(Error::config(
                    "train.selection_temperatures",
                    format!("{t} is not one of generation.temperatures"),
                ));
            }
        }
        if let Some(t) = self.align.temperature {
            if !self.generation.temperatures.contains(&t) {
                return Err(Error::config("align.temperature", format!("{t} is not one of generation.temperatures")));
            }
        }
        self.alignment_params().validate()?;
        if !(0.0..=1.0).contains(&self.align.threshold) {
            return Err(Error::config("align.threshold", "must lie in [0, 1]"));
        }
        if self.embedding.kind == EmbeddingKind::Hashing && self.embedding.dim < crate::embed::MIN_HASHING_DIM {
            return Err(Error::config("embedding.dim", format!("must be at least {}", crate::embed::MIN_HASHING_DIM)));
        }
        if self.embedding.kind == EmbeddingKind::Remote && self.embedding.model.is_none() {
            return Err(Error::config("embedding.model", "required for remote embeddings"));
        }
        if !(0.0..=1.0).contains(&self.backend.mock.failure_rate) {
            return Err(Error::config("backend.mock.failure_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// The persona bundle temperature used by `align`.
    pub fn align_temperature(&self) -> f64 {
        self.align.temperature.unwrap_or_else(|| self.generation.temperatures.first().copied().unwrap_or(0.0))
    }
}
