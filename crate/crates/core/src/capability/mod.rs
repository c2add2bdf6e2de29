//! Capability conditions: scoring, quantization and the meta-prompt.

mod meta_prompt;
mod quantize;

use serde::{Deserialize, Serialize};

use crate::backends::{GeneratorBackend, ImageRef, ScorerBackend};
use crate::error::{CaprError, Result};
use crate::log_store::ReformulationPair;
use crate::text::phrase_count;

pub use meta_prompt::{parse_meta_prompt, render_meta_prompt};
pub use quantize::{quantize, FeatureRange, FeatureRanges, QuantizerSpec, ScoreBins, DEFAULT_K};

/// Scorer outputs for one prompt (or one prompt-image pair).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub overall: f64,
    pub similarity: f64,
    pub aesthetic: f64,
}

impl QualityScores {
    pub fn new(overall: f64, similarity: f64, aesthetic: f64) -> Result<Self> {
        let s = Self {
            overall,
            similarity,
            aesthetic,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.overall.is_finite() && self.similarity.is_finite() && self.aesthetic.is_finite() {
            Ok(())
        } else {
            Err(CaprError::invalid(format!("non-finite quality scores {self:?}")))
        }
    }

    /// Component-wise arithmetic mean.
    pub fn mean_of(scores: &[QualityScores]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        let (o, s, a) = scores.iter().fold((0.0, 0.0, 0.0), |(o, s, a), q| {
            (o + q.overall, s + q.similarity, a + q.aesthetic)
        });
        Some(Self {
            overall: o / n,
            similarity: s / n,
            aesthetic: a / n,
        })
    }
}

/// Expected capability of the reformulation: bins plus phrase count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpectedCapability {
    pub similarity: usize,
    pub aesthetic: usize,
    pub overall: usize,
    pub phrase_count: usize,
}

impl ExpectedCapability {
    pub fn bins(&self) -> ScoreBins {
        ScoreBins {
            similarity: self.similarity,
            aesthetic: self.aesthetic,
            overall: self.overall,
        }
    }
}

/// Composite condition: capability of the initial prompt and the capability
/// expected of its reformulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CapabilityCondition {
    pub initial: ScoreBins,
    pub expected: ExpectedCapability,
}

impl CapabilityCondition {
    /// Build from `(similarity, aesthetic, overall)` tuples and a phrase count.
    pub fn from_parts(
        initial: (usize, usize, usize),
        expected: (usize, usize, usize),
        phrase_count: usize,
    ) -> Self {
        Self {
            initial: ScoreBins {
                similarity: initial.0,
                aesthetic: initial.1,
                overall: initial.2,
            },
            expected: ExpectedCapability {
                similarity: expected.0,
                aesthetic: expected.1,
                overall: expected.2,
                phrase_count,
            },
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let e = &self.expected;
        let i = &self.initial;
        let all = [i.similarity, i.aesthetic, i.overall, e.similarity, e.aesthetic, e.overall];
        if let Some(b) = all.iter().find(|&&b| b >= k) {
            return Err(CaprError::invalid(format!("bin {b} outside [0, {}]", k - 1)));
        }
        Ok(())
    }
}

/// Anything that can produce quality scores for a bare prompt.
pub trait PromptScorer: Send + Sync {
    fn prompt_scores(&self, prompt: &str) -> Result<QualityScores>;
}

/// Mean of per-image scores for `prompt`.
pub fn score_prompt(
    prompt: &str,
    images: &[ImageRef],
    scorer: &dyn ScorerBackend,
) -> Result<QualityScores> {
    if images.is_empty() {
        return Err(CaprError::invalid("score_prompt needs at least one image").for_prompt(prompt));
    }
    let per_image = images
        .iter()
        .map(|img| scorer.score(prompt, img))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.for_prompt(prompt))?;
    Ok(QualityScores::mean_of(&per_image).expect("non-empty"))
}

/// Generate-then-score: renders `images_per_prompt` images with consecutive
/// seeds and averages their scores.
pub struct GenerateAndScore<'a> {
    pub generator: &'a dyn GeneratorBackend,
    pub scorer: &'a dyn ScorerBackend,
    pub images_per_prompt: usize,
    pub seed: u64,
    pub steps: u32,
}

impl GenerateAndScore<'_> {
    pub fn images(&self, prompt: &str) -> Result<Vec<ImageRef>> {
        (0..self.images_per_prompt as u64)
            .map(|i| self.generator.generate(prompt, self.seed.wrapping_add(i), self.steps))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.for_prompt(prompt))
    }
}

impl PromptScorer for GenerateAndScore<'_> {
    fn prompt_scores(&self, prompt: &str) -> Result<QualityScores> {
        let images = self.images(prompt)?;
        score_prompt(prompt, &images, self.scorer)
    }
}

/// Scores of the initial and final prompt, from the pair when present and
/// from `scorer` otherwise.
pub fn pair_scores(
    pair: &ReformulationPair,
    scorer: Option<&dyn PromptScorer>,
) -> Result<(QualityScores, QualityScores)> {
    let resolve = |pre: Option<QualityScores>, prompt: &str| match (pre, scorer) {
        (Some(s), _) => Ok(s),
        (None, Some(sc)) => sc.prompt_scores(prompt),
        (None, None) => Err(CaprError::invalid("no precomputed scores and no scorer").for_prompt(prompt)),
    };
    Ok((
        resolve(pair.initial_scores, &pair.initial_prompt)?,
        resolve(pair.final_scores, &pair.final_prompt)?,
    ))
}

/// Condition observed in a mined pair: quantized scores of both prompts and
/// the final prompt's phrase count.
pub fn build_condition(
    pair: &ReformulationPair,
    spec: &QuantizerSpec,
    scorer: Option<&dyn PromptScorer>,
) -> Result<CapabilityCondition> {
    let phrases = phrase_count(&pair.final_prompt);
    if phrases == 0 {
        return Err(
            CaprError::invalid("reformulated prompt has no phrases").for_prompt(&pair.final_prompt)
        );
    }
    let (initial, fin) = pair_scores(pair, scorer)?;
    let e = spec.bins(&fin);
    Ok(CapabilityCondition {
        initial: spec.bins(&initial),
        expected: ExpectedCapability {
            similarity: e.similarity,
            aesthetic: e.aesthetic,
            overall: e.overall,
            phrase_count: phrases,
        },
    })
}
