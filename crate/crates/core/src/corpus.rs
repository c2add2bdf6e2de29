//! Training triplets for the conditional reformulation model.
//!
//! Each exported line is `{input, target, meta: {session_id, condition}}`
//! where `input` is the rendered meta-prompt and `target` the user's final
//! prompt. Tokenization and the loss belong to the external trainer.

use std::collections::BTreeSet;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capability::{
    build_condition, pair_scores, parse_meta_prompt, render_meta_prompt, CapabilityCondition,
    PromptScorer, QualityScores, QuantizerSpec,
};
use crate::error::{CaprError, Result};
use crate::log_store::ReformulationPair;
use crate::text::phrase_count;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VAL_FILE: &str = "val.jsonl";
pub const QUANTIZER_FILE: &str = "quantizer.json";
pub const MANIFEST_FILE: &str = "corpus_manifest.json";
/// Scored pairs kept for surrogate fitting.
pub const SCORED_PAIRS_FILE: &str = "scored_pairs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub initial_prompt: String,
    pub condition: CapabilityCondition,
    pub target_prompt: String,
    pub rendered_input: String,
    pub session_id: String,
}

impl TrainingTriplet {
    pub fn new(pair: &ReformulationPair, condition: CapabilityCondition) -> Self {
        Self {
            rendered_input: render_meta_prompt(&pair.initial_prompt, &condition),
            initial_prompt: pair.initial_prompt.clone(),
            condition,
            target_prompt: pair.final_prompt.clone(),
            session_id: pair.session_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub unscorable: usize,
    pub zero_phrase: usize,
}

/// Fill in missing scores on every pair. Pairs that cannot be scored are
/// dropped and counted.
pub fn resolve_pair_scores(
    pairs: &[ReformulationPair],
    scorer: Option<&dyn PromptScorer>,
) -> (Vec<ReformulationPair>, usize) {
    let resolved: Vec<Option<ReformulationPair>> = pairs
        .par_iter()
        .map(|p| match pair_scores(p, scorer) {
            Ok((a, b)) => Some(ReformulationPair {
                initial_scores: Some(a),
                final_scores: Some(b),
                ..p.clone()
            }),
            Err(e) => {
                warn!("pair {} unscorable: {e}", p.session_id);
                None
            }
        })
        .collect();
    let dropped = resolved.iter().filter(|p| p.is_none()).count();
    (resolved.into_iter().flatten().collect(), dropped)
}

/// Pooled initial and final scores of scored pairs.
pub fn pooled_scores(pairs: &[ReformulationPair]) -> Vec<QualityScores> {
    pairs
        .iter()
        .flat_map(|p| [p.initial_scores, p.final_scores])
        .flatten()
        .collect()
}

/// One triplet per usable pair; unscorable pairs and zero-phrase targets are
/// dropped and counted.
pub fn build_triplets(
    pairs: &[ReformulationPair],
    spec: &QuantizerSpec,
    scorer: Option<&dyn PromptScorer>,
) -> Result<(Vec<TrainingTriplet>, DropCounts)> {
    enum Outcome {
        Built(TrainingTriplet),
        ZeroPhrase,
        Unscorable,
    }
    let outcomes: Vec<Outcome> = pairs
        .par_iter()
        .map(|p| {
            if phrase_count(&p.final_prompt) == 0 {
                return Outcome::ZeroPhrase;
            }
            match build_condition(p, spec, scorer) {
                Ok(c) => Outcome::Built(TrainingTriplet::new(p, c)),
                Err(e) => {
                    warn!("pair {} dropped: {e}", p.session_id);
                    Outcome::Unscorable
                }
            }
        })
        .collect();
    let mut drops = DropCounts::default();
    let mut triplets = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Built(t) => triplets.push(t),
            Outcome::ZeroPhrase => drops.zero_phrase += 1,
            Outcome::Unscorable => drops.unscorable += 1,
        }
    }
    if triplets.is_empty() {
        return Err(CaprError::EmptyCorpus);
    }
    Ok((triplets, drops))
}

/// Session-level seeded split: no session lands on both sides.
pub fn split(
    triplets: &[TrainingTriplet],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainingTriplet>, Vec<TrainingTriplet>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CaprError::invalid("val_fraction must lie strictly between 0 and 1"));
    }
    let sessions: BTreeSet<&str> = triplets.iter().map(|t| t.session_id.as_str()).collect();
    if sessions.len() < 2 {
        return Err(CaprError::invalid(format!(
            "need at least 2 sessions to split, got {}",
            sessions.len()
        )));
    }
    let mut order: Vec<&str> = sessions.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((order.len() as f64 * val_fraction).round() as usize).clamp(1, order.len() - 1);
    let val_sessions: BTreeSet<&str> = order[..n_val].iter().copied().collect();
    let (val, train): (Vec<_>, Vec<_>) = triplets
        .iter()
        .cloned()
        .partition(|t| val_sessions.contains(t.session_id.as_str()));
    Ok((train, val))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub session_id: String,
    pub condition: CapabilityCondition,
}

/// One exported corpus line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub input: String,
    pub target: String,
    pub meta: ExportMeta,
}

impl From<&TrainingTriplet> for ExportRecord {
    fn from(t: &TrainingTriplet) -> Self {
        Self {
            input: t.rendered_input.clone(),
            target: t.target_prompt.clone(),
            meta: ExportMeta {
                session_id: t.session_id.clone(),
                condition: t.condition,
            },
        }
    }
}

impl TryFrom<ExportRecord> for TrainingTriplet {
    type Error = CaprError;

    fn try_from(r: ExportRecord) -> Result<Self> {
        let (initial_prompt, parsed) = parse_meta_prompt(&r.input)?;
        if parsed != r.meta.condition {
            return Err(CaprError::invalid("rendered input disagrees with meta.condition"));
        }
        Ok(Self {
            initial_prompt,
            condition: parsed,
            target_prompt: r.target,
            rendered_input: r.input,
            session_id: r.meta.session_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub train: usize,
    pub validation: usize,
    pub pairs: usize,
    pub dropped: DropCounts,
    pub k: usize,
}

fn write_jsonl(path: &Path, triplets: &[TrainingTriplet]) -> Result<()> {
    let mut body = String::new();
    for t in triplets {
        body.push_str(&serde_json::to_string(&ExportRecord::from(t))?);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| CaprError::io(path, e))
}

/// Write `train.jsonl`, `val.jsonl`, `quantizer.json` and `corpus_manifest.json`.
pub fn export(
    train: &[TrainingTriplet],
    validation: &[TrainingTriplet],
    spec: &QuantizerSpec,
    drops: DropCounts,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    if train.is_empty() {
        return Err(CaprError::invalid("refusing to export an empty training split"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CaprError::io(out_dir, e))?;
    write_jsonl(&out_dir.join(TRAIN_FILE), train)?;
    write_jsonl(&out_dir.join(VAL_FILE), validation)?;
    spec.save(&out_dir.join(QUANTIZER_FILE))?;
    let manifest = CorpusManifest {
        train: train.len(),
        validation: validation.len(),
        pairs: train.len() + validation.len() + drops.unscorable + drops.zero_phrase,
        dropped: drops,
        k: spec.k,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| CaprError::io(&path, e))?;
    Ok(manifest)
}

/// Write scored pairs as JSON lines.
pub fn write_scored_pairs(pairs: &[ReformulationPair], path: &Path) -> Result<()> {
    let mut body = String::new();
    for p in pairs {
        body.push_str(&serde_json::to_string(p)?);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| CaprError::io(path, e))
}

pub fn load_scored_pairs(path: &Path) -> Result<Vec<ReformulationPair>> {
    let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Read back an exported split.
pub fn load_split(path: &Path) -> Result<Vec<TrainingTriplet>> {
    let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| TrainingTriplet::try_from(serde_json::from_str::<ExportRecord>(l)?))
        .collect()
}
