use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use capr::backends::BackendConfig;
use capr::log_store::SegmentationParams;
use capr::tuner::{GpHyper, SearchSpace, DEFAULT_TUNING_STEPS, DEFAULT_XI};
use serde::{Deserialize, Serialize};

/// Everything a run needs; loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub backend: BackendConfig,
    pub k: usize,
    pub seed: u64,
    pub workers: usize,
    pub segmentation: SegmentationParams,
    pub corpus: CorpusSection,
    pub surrogate: SurrogateSection,
    pub tuner: TunerSection,
    pub eval: EvalSection,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            k: capr::capability::DEFAULT_K,
            seed: 0,
            workers: 1,
            segmentation: SegmentationParams::default(),
            corpus: CorpusSection::default(),
            surrogate: SurrogateSection::default(),
            tuner: TunerSection::default(),
            eval: EvalSection::default(),
            paths: Paths::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub val_fraction: f64,
    /// Images rendered per prompt when a log record carries no scores.
    pub images_per_prompt: usize,
    pub steps: u32,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { val_fraction: 0.2, images_per_prompt: 1, steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSection {
    pub lambda: f64,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self { lambda: capr::surrogate::DEFAULT_LAMBDA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunerSection {
    pub budget: usize,
    pub n_initial: usize,
    /// Defaults to overall pinned at `k - 1`, similarity and aesthetic in
    /// `[0, k - 1]`, length in `[0, 9]`.
    pub bounds: Option<SearchSpace>,
    pub hyper: GpHyper<f64>,
    pub xi: f64,
    pub images_per_prompt: usize,
    pub steps: u32,
}

impl Default for TunerSection {
    fn default() -> Self {
        Self {
            budget: 50,
            n_initial: 10,
            bounds: None,
            hyper: GpHyper::default(),
            xi: DEFAULT_XI,
            images_per_prompt: 1,
            steps: DEFAULT_TUNING_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub images_per_prompt: usize,
    pub steps: u32,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            images_per_prompt: capr::evaluation::DEFAULT_IMAGES_PER_PROMPT,
            steps: capr::evaluation::DEFAULT_EVAL_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub store: PathBuf,
    pub sessions: PathBuf,
    pub corpus: PathBuf,
    pub surrogate: PathBuf,
    pub delta: PathBuf,
    pub reports: PathBuf,
    /// One prompt per line; defaults to the corpus validation split.
    pub validation_prompts: Option<PathBuf>,
    /// One prompt per line; defaults to the corpus validation split.
    pub test_prompts: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        let root = PathBuf::from("capr-out");
        Self {
            store: root.join("store"),
            sessions: root.join("sessions.json"),
            corpus: root.join("corpus"),
            surrogate: root.join("surrogate.json"),
            delta: root.join("delta.json"),
            reports: root.join("reports"),
            validation_prompts: None,
            test_prompts: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.k < 2 {
            bail!("k must be at least 2, got {}", self.k);
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        self.segmentation.validate()?;
        self.search_space().validate(self.k)?;
        Ok(())
    }

    pub fn search_space(&self) -> SearchSpace {
        self.tuner.bounds.clone().unwrap_or_else(|| SearchSpace::default_for(self.k))
    }
}
