use rayon::prelude::*;

use crate::backends::{GeneratorBackend, ReformulatorBackend, ScorerBackend};
use crate::capability::{
    score_prompt, CapabilityCondition, ExpectedCapability, QualityScores, QuantizerSpec, ScoreBins,
};
use crate::error::{CaprError, Result};
use crate::surrogate::QualityPredictor;
use crate::text::phrase_count;

use super::DeltaVector;

/// Denoising steps used while tuning.
pub const DEFAULT_TUNING_STEPS: u32 = 20;

fn shift(bin: usize, delta: i64, k: usize) -> usize {
    (bin as i64 + delta).clamp(0, k as i64 - 1) as usize
}

/// `c'' = clamp(c' + δ)` on the bins; phrase count `max(1, phrases(prompt) + δ_len)`.
pub fn target_condition(predicted: ScoreBins, prompt: &str, delta: &DeltaVector, k: usize) -> CapabilityCondition {
    let phrases = (phrase_count(prompt) as i64 + delta.length).max(1) as usize;
    CapabilityCondition {
        initial: predicted,
        expected: ExpectedCapability {
            similarity: shift(predicted.similarity, delta.similarity, k),
            aesthetic: shift(predicted.aesthetic, delta.aesthetic, k),
            overall: shift(predicted.overall, delta.overall, k),
            phrase_count: phrases,
        },
    }
}

/// Everything needed to turn a delta into a validation-set score.
pub struct ObjectiveEstimator<'a> {
    pub prompts: &'a [String],
    pub predictor: &'a dyn QualityPredictor,
    pub quantizer: &'a QuantizerSpec,
    pub reformulator: &'a dyn ReformulatorBackend,
    pub generator: &'a dyn GeneratorBackend,
    pub scorer: &'a dyn ScorerBackend,
    pub seed: u64,
    pub steps: u32,
    pub images_per_prompt: usize,
}

/// Outcome of one conditioned reformulation of one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptOutcome {
    pub reformulated: String,
    pub condition: CapabilityCondition,
    /// Mean over images, scored against the original prompt.
    pub scores: QualityScores,
}

impl ObjectiveEstimator<'_> {
    pub fn condition(&self, prompt: &str, delta: &DeltaVector) -> Result<CapabilityCondition> {
        let predicted = self.predictor.predict(prompt).map_err(|e| e.for_prompt(prompt))?;
        Ok(target_condition(self.quantizer.bins(&predicted), prompt, delta, self.quantizer.k))
    }

    /// Reformulate `prompt` under `delta`, generate and score against `prompt`.
    pub fn run_prompt(&self, prompt: &str, delta: &DeltaVector) -> Result<PromptOutcome> {
        let condition = self.condition(prompt, delta)?;
        let reformulated = self
            .reformulator
            .reformulate(prompt, &condition)
            .map_err(|e| e.for_prompt(prompt))?;
        let images = (0..self.images_per_prompt as u64)
            .map(|i| self.generator.generate(&reformulated, self.seed.wrapping_add(i), self.steps))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.for_prompt(prompt))?;
        let scores = score_prompt(prompt, &images, self.scorer)?;
        Ok(PromptOutcome {
            reformulated,
            condition,
            scores,
        })
    }

    /// Mean overall score over the validation prompts.
    pub fn evaluate(&self, delta: &DeltaVector) -> Result<f64> {
        if self.prompts.is_empty() {
            return Err(CaprError::invalid("validation prompt set is empty"));
        }
        if self.images_per_prompt == 0 {
            return Err(CaprError::invalid("images_per_prompt must be at least 1"));
        }
        let per_prompt = self
            .prompts
            .par_iter()
            .map(|p| self.run_prompt(p, delta).map(|o| o.scores.overall))
            .collect::<Result<Vec<f64>>>()?;
        Ok(per_prompt.iter().sum::<f64>() / per_prompt.len() as f64)
    }
}
