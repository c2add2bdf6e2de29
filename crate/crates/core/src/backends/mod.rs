//! Pluggable generator, scorer, reformulator and similarity backends.
//!
//! Two families implement the traits: the deterministic synthetic world in
//! [`synthetic`] and HTTP JSON clients in [`remote`].

pub mod remote;
pub mod synth_data;
pub mod synthetic;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::capability::{CapabilityCondition, QualityScores};
use crate::error::{CaprError, Result};
use crate::text::StyleLexicon;

pub use remote::{RemoteClient, RemoteGenerator, RemoteReformulator, RemoteScorer, RemoteSimilarity};
pub use synthetic::{
    hash_uniform, IdentityReformulator, JaccardSimilarity, SyntheticGenerator,
    SyntheticReformulator, SyntheticScorer,
};

/// Reference to a generated image. Synthetic images carry
/// `[style_count, phrase_count, noise_u]` as features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl ImageRef {
    fn feature(&self, i: usize) -> Option<f64> {
        self.features.as_ref().filter(|f| f.len() == 3).map(|f| f[i])
    }

    pub fn style_count(&self) -> Option<f64> {
        self.feature(0)
    }

    pub fn phrase_count(&self) -> Option<f64> {
        self.feature(1)
    }

    pub fn noise(&self) -> Option<f64> {
        self.feature(2)
    }
}

/// Text-to-image generator.
pub trait GeneratorBackend: Send + Sync {
    fn generate(&self, prompt: &str, seed: u64, steps: u32) -> Result<ImageRef>;
}

/// Scores a (prompt, image) pair.
pub trait ScorerBackend: Send + Sync {
    fn score(&self, prompt: &str, image: &ImageRef) -> Result<QualityScores>;
}

/// Conditional reformulation model. Remote implementations receive the
/// rendered meta-prompt verbatim.
pub trait ReformulatorBackend: Send + Sync {
    fn reformulate(&self, prompt: &str, condition: &CapabilityCondition) -> Result<String>;
}

/// Symmetric text similarity in `[0, 1]`.
pub trait TextSimilarity: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<f64>;
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for &T {
    fn generate(&self, prompt: &str, seed: u64, steps: u32) -> Result<ImageRef> {
        (**self).generate(prompt, seed, steps)
    }
}

impl<T: ScorerBackend + ?Sized> ScorerBackend for &T {
    fn score(&self, prompt: &str, image: &ImageRef) -> Result<QualityScores> {
        (**self).score(prompt, image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reformulate: Option<String>,
}

/// Backend selection as it appears in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub backend: BackendKind,
    pub endpoints: Endpoints,
    pub timeout_secs: u64,
    /// Total attempts per request, first try included.
    pub retries: u32,
    pub backoff_ms: u64,
    pub lexicon_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Synthetic,
            endpoints: Endpoints::default(),
            timeout_secs: 60,
            retries: 3,
            backoff_ms: 200,
            lexicon_path: None,
        }
    }
}

/// The four backends used by a run, plus the style lexicon.
pub struct Backends {
    pub generator: Box<dyn GeneratorBackend>,
    pub scorer: Box<dyn ScorerBackend>,
    pub reformulator: Box<dyn ReformulatorBackend>,
    pub similarity: Box<dyn TextSimilarity>,
    pub lexicon: StyleLexicon,
}

impl Backends {
    pub fn synthetic(lexicon: StyleLexicon) -> Self {
        Self {
            generator: Box::new(SyntheticGenerator::new(lexicon.clone())),
            scorer: Box::new(SyntheticScorer),
            reformulator: Box::new(SyntheticReformulator::new(lexicon.clone())),
            similarity: Box::new(JaccardSimilarity),
            lexicon,
        }
    }

    pub fn from_config(config: &BackendConfig) -> Result<Self> {
        let lexicon = match &config.lexicon_path {
            Some(p) => StyleLexicon::load(p)?,
            None => StyleLexicon::default(),
        };
        match config.backend {
            BackendKind::Synthetic => Ok(Self::synthetic(lexicon)),
            BackendKind::Remote => {
                let client = RemoteClient::new(
                    Duration::from_secs(config.timeout_secs),
                    config.retries,
                    Duration::from_millis(config.backoff_ms),
                )?;
                let need = |name: &str, v: &Option<String>| {
                    v.clone().ok_or_else(|| {
                        CaprError::invalid(format!("remote backend needs endpoints.{name}"))
                    })
                };
                let e = &config.endpoints;
                let similarity: Box<dyn TextSimilarity> = match &e.similarity {
                    Some(url) => Box::new(RemoteSimilarity::new(client.clone(), url.clone())),
                    None => Box::new(JaccardSimilarity),
                };
                Ok(Self {
                    generator: Box::new(RemoteGenerator::new(client.clone(), need("generate", &e.generate)?)),
                    scorer: Box::new(RemoteScorer::new(client.clone(), need("score", &e.score)?)),
                    reformulator: Box::new(RemoteReformulator::new(
                        client,
                        need("reformulate", &e.reformulate)?,
                    )),
                    similarity,
                    lexicon,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_config_parses_with_defaults() {
        let cfg: BackendConfig = serde_json::from_str(
            r#"{"backend":"remote","endpoints":{"score":"http://h/score"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.backend, BackendKind::Remote);
        assert_eq!(cfg.retries, 3);
        assert_eq!(cfg.timeout_secs, 60);
        assert_eq!(cfg.endpoints.score.as_deref(), Some("http://h/score"));
    }

    #[test]
    fn remote_without_endpoints_is_rejected() {
        let cfg = BackendConfig {
            backend: BackendKind::Remote,
            ..Default::default()
        };
        assert!(Backends::from_config(&cfg).is_err());
    }

    #[test]
    fn image_features_need_three_components() {
        let img = ImageRef { image_id: "x".into(), features: Some(vec![1.0, 2.0]) };
        assert_eq!(img.noise(), None);
        let img = ImageRef { image_id: "x".into(), features: Some(vec![1.0, 2.0, -0.5]) };
        assert_eq!(img.noise(), Some(-0.5));
    }
}
