//! Policy evaluation, paired comparisons and the delta sweep.
//!
//! Every policy is judged the same way: rewrite the prompt, generate
//! images with consecutive seeds, and score each image against the
//! original prompt.

mod stats;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{GeneratorBackend, ReformulatorBackend, ScorerBackend};
use crate::capability::{score_prompt, CapabilityCondition, QuantizerSpec};
use crate::error::{CaprError, Result};
use crate::surrogate::QualityPredictor;
use crate::text::{phrase_count, phrases, StyleLexicon};
use crate::tuner::{target_condition, DeltaVector};

pub use stats::{paired_t_test, spearman, two_sided_p, TTest};
pub use sweep::{delta_sweep, SweepFactor, SweepRow, SweepTable};

pub const DEFAULT_IMAGES_PER_PROMPT: usize = 4;
pub const DEFAULT_EVAL_STEPS: u32 = 50;
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

/// Rewrites a prompt without any capability condition.
pub trait UnconditionalRewriter: Send + Sync {
    fn rewrite(&self, prompt: &str) -> Result<String>;
}

/// Condition-free baseline: appends the first two style terms the prompt
/// lacks.
#[derive(Debug, Clone)]
pub struct StyleSuffixBaseline {
    lexicon: StyleLexicon,
}

impl StyleSuffixBaseline {
    pub fn new(lexicon: StyleLexicon) -> Self {
        Self { lexicon }
    }
}

impl UnconditionalRewriter for StyleSuffixBaseline {
    fn rewrite(&self, prompt: &str) -> Result<String> {
        let present = self.lexicon.distinct_terms(prompt);
        let mut out: Vec<&str> = phrases(prompt);
        out.extend(
            self.lexicon
                .style_terms
                .iter()
                .filter(|t| !present.contains(*t))
                .take(2)
                .map(String::as_str),
        );
        Ok(out.join(", "))
    }
}

/// How a policy turns a test prompt into the prompt sent to the generator.
pub enum PolicyKind<'a> {
    Identity,
    Unconditional(&'a dyn UnconditionalRewriter),
    Conditioned {
        reformulator: &'a dyn ReformulatorBackend,
        predictor: &'a dyn QualityPredictor,
        quantizer: &'a QuantizerSpec,
        delta: DeltaVector,
    },
}

pub struct Policy<'a> {
    pub name: String,
    pub kind: PolicyKind<'a>,
}

impl<'a> Policy<'a> {
    pub fn identity() -> Self {
        Self { name: "identity".into(), kind: PolicyKind::Identity }
    }

    pub fn conditioned(
        name: impl Into<String>,
        reformulator: &'a dyn ReformulatorBackend,
        predictor: &'a dyn QualityPredictor,
        quantizer: &'a QuantizerSpec,
        delta: DeltaVector,
    ) -> Self {
        Self {
            name: name.into(),
            kind: PolicyKind::Conditioned { reformulator, predictor, quantizer, delta },
        }
    }

    fn rewrite(&self, prompt: &str) -> Result<(String, Option<CapabilityCondition>)> {
        match &self.kind {
            PolicyKind::Identity => Ok((prompt.to_string(), None)),
            PolicyKind::Unconditional(r) => Ok((r.rewrite(prompt)?, None)),
            PolicyKind::Conditioned { reformulator, predictor, quantizer, delta } => {
                let predicted = quantizer.bins(&predictor.predict(prompt)?);
                let condition = target_condition(predicted, prompt, delta, quantizer.k);
                Ok((reformulator.reformulate(prompt, &condition)?, Some(condition)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub images_per_prompt: usize,
    pub seed: u64,
    pub steps: u32,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            images_per_prompt: DEFAULT_IMAGES_PER_PROMPT,
            seed: 0,
            steps: DEFAULT_EVAL_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptResult {
    pub prompt: String,
    pub reformulated: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<CapabilityCondition>,
    pub overall: f64,
    pub similarity: f64,
    pub aesthetic: f64,
    pub phrases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFailure {
    pub prompt: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub overall: f64,
    pub similarity: f64,
    pub aesthetic: f64,
    pub phrases: f64,
}

/// One policy's results over a prompt set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: String,
    pub settings: EvalSettings,
    pub per_prompt: Vec<PromptResult>,
    pub failures: Vec<PromptFailure>,
    pub aggregate: Aggregate,
}

impl PolicyRun {
    pub fn overall(&self) -> Vec<f64> {
        self.per_prompt.iter().map(|r| r.overall).collect()
    }
}

/// Unweighted mean of per-prompt means.
fn aggregate(rows: &[PromptResult]) -> Aggregate {
    let n = rows.len().max(1) as f64;
    let sum = |f: fn(&PromptResult) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Aggregate {
        overall: sum(|r| r.overall),
        similarity: sum(|r| r.similarity),
        aesthetic: sum(|r| r.aesthetic),
        phrases: sum(|r| r.phrases as f64),
    }
}

/// Evaluate `policy` on `prompts`.
///
/// Prompts are processed in parallel; results keep prompt order. Failed
/// prompts are recorded and skipped, and more than 10% failures abort.
pub fn evaluate_policy(
    policy: &Policy<'_>,
    prompts: &[String],
    settings: &EvalSettings,
    generator: &dyn GeneratorBackend,
    scorer: &dyn ScorerBackend,
) -> Result<PolicyRun> {
    if prompts.is_empty() {
        return Err(CaprError::invalid("test prompt set is empty"));
    }
    if settings.images_per_prompt == 0 {
        return Err(CaprError::invalid("images_per_prompt must be at least 1"));
    }
    let outcomes: Vec<Result<PromptResult>> = prompts
        .par_iter()
        .map(|prompt| {
            let run = || -> Result<PromptResult> {
                let (reformulated, condition) = policy.rewrite(prompt)?;
                let images = (0..settings.images_per_prompt as u64)
                    .map(|i| generator.generate(&reformulated, settings.seed.wrapping_add(i), settings.steps))
                    .collect::<Result<Vec<_>>>()?;
                let s = score_prompt(prompt, &images, scorer)?;
                Ok(PromptResult {
                    prompt: prompt.clone(),
                    phrases: phrase_count(&reformulated),
                    reformulated,
                    condition,
                    overall: s.overall,
                    similarity: s.similarity,
                    aesthetic: s.aesthetic,
                })
            };
            run().map_err(|e| match e {
                e @ CaprError::Prompt { .. } => e,
                e => e.for_prompt(prompt),
            })
        })
        .collect();

    let mut per_prompt = Vec::with_capacity(prompts.len());
    let mut failures = Vec::new();
    for (prompt, outcome) in prompts.iter().zip(outcomes) {
        match outcome {
            Ok(r) => per_prompt.push(r),
            Err(e) => {
                warn!("policy {}: {e}", policy.name);
                failures.push(PromptFailure { prompt: prompt.clone(), error: e.to_string() });
            }
        }
    }
    if failures.len() * 10 > prompts.len() {
        return Err(CaprError::TooManyFailures { failed: failures.len(), total: prompts.len() });
    }
    Ok(PolicyRun {
        policy: policy.name.clone(),
        settings: *settings,
        aggregate: aggregate(&per_prompt),
        per_prompt,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Mean of `policy - baseline` overall scores.
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    /// `p < 0.01`.
    pub significant: bool,
}

/// `report.json` entry for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub per_prompt: Vec<PromptResult>,
    pub failures: Vec<PromptFailure>,
    pub aggregate: Aggregate,
    pub comparisons: BTreeMap<String, Comparison>,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub images_per_prompt: usize,
    pub seeds: Vec<u64>,
    pub steps: u32,
    pub backend: String,
}

impl EvalReport {
    /// `*` when the comparison against `baseline` is significant.
    pub fn marker(&self, baseline: &str) -> &'static str {
        match self.comparisons.get(baseline) {
            Some(c) if c.significant => "*",
            _ => "",
        }
    }
}

pub fn comparison(policy: &PolicyRun, baseline: &PolicyRun) -> Result<Comparison> {
    let names = |r: &PolicyRun| r.per_prompt.iter().map(|p| p.prompt.clone()).collect::<Vec<_>>();
    if names(policy) != names(baseline) || policy.settings != baseline.settings {
        return Err(CaprError::invalid(format!(
            "policies {} and {} were not run on the same prompts and seeds",
            policy.policy, baseline.policy
        )));
    }
    let (a, b) = (policy.overall(), baseline.overall());
    let test = paired_t_test(&a, &b)?;
    let mean_diff = a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    Ok(Comparison {
        mean_diff,
        t: test.t,
        p: test.p,
        significant: test.p < SIGNIFICANCE_LEVEL,
    })
}

/// Paired comparisons of every run against every named baseline other
/// than itself.
pub fn compare(runs: &[PolicyRun], baselines: &[&str], backend: &str) -> Result<Vec<EvalReport>> {
    if runs.len() < 2 {
        return Err(CaprError::invalid("compare needs at least two policies"));
    }
    let names: BTreeSet<&str> = runs.iter().map(|r| r.policy.as_str()).collect();
    if names.len() != runs.len() {
        return Err(CaprError::invalid("policy names must be unique"));
    }
    for b in baselines {
        if !names.contains(b) {
            return Err(CaprError::invalid(format!("unknown baseline {b}")));
        }
    }
    runs.iter()
        .map(|run| {
            let mut comparisons = BTreeMap::new();
            for base in runs.iter().filter(|b| baselines.contains(&b.policy.as_str())) {
                if base.policy != run.policy {
                    comparisons.insert(base.policy.clone(), comparison(run, base)?);
                }
            }
            let s = run.settings;
            Ok(EvalReport {
                policy: run.policy.clone(),
                per_prompt: run.per_prompt.clone(),
                failures: run.failures.clone(),
                aggregate: run.aggregate,
                comparisons,
                config: ConfigEcho {
                    images_per_prompt: s.images_per_prompt,
                    seeds: (0..s.images_per_prompt as u64).map(|i| s.seed.wrapping_add(i)).collect(),
                    steps: s.steps,
                    backend: backend.to_string(),
                },
            })
        })
        .collect()
}

pub fn save_reports(reports: &[EvalReport], path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(reports)? + "\n").map_err(|e| CaprError::io(path, e))
}

pub fn load_reports(path: &Path) -> Result<Vec<EvalReport>> {
    let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
    Ok(serde_json::from_str(&raw)?)
}
