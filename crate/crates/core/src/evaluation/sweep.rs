use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{GeneratorBackend, ReformulatorBackend, ScorerBackend};
use crate::capability::QuantizerSpec;
use crate::error::{CaprError, Result};
use crate::surrogate::QualityPredictor;
use crate::tuner::DeltaVector;

use super::{evaluate_policy, EvalSettings, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFactor {
    Overall,
    Similarity,
    Aesthetic,
    Length,
}

impl SweepFactor {
    pub fn name(&self) -> &'static str {
        match self {
            SweepFactor::Overall => "overall",
            SweepFactor::Similarity => "similarity",
            SweepFactor::Aesthetic => "aesthetic",
            SweepFactor::Length => "length",
        }
    }

    fn apply(&self, mut d: DeltaVector, v: i64) -> DeltaVector {
        match self {
            SweepFactor::Overall => d.overall = v,
            SweepFactor::Similarity => d.similarity = v,
            SweepFactor::Aesthetic => d.aesthetic = v,
            SweepFactor::Length => d.length = v,
        }
        d
    }

    /// Frozen deltas used when none are given: length 5, everything else 0.
    pub fn default_frozen() -> DeltaVector {
        DeltaVector::new(0, 0, 0, 5)
    }
}

impl FromStr for SweepFactor {
    type Err = CaprError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overall" => Ok(SweepFactor::Overall),
            "similarity" => Ok(SweepFactor::Similarity),
            "aesthetic" => Ok(SweepFactor::Aesthetic),
            "length" => Ok(SweepFactor::Length),
            other => Err(CaprError::invalid(format!("unknown sweep factor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: i64,
    pub overall: f64,
    pub similarity: f64,
    pub aesthetic: f64,
    pub phrases: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub factor: SweepFactor,
    pub frozen: DeltaVector,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with a leading `#` comment echoing the factor and frozen deltas.
    pub fn to_csv(&self) -> String {
        let f = &self.frozen;
        let mut out = format!(
            "# factor={} frozen: overall={} similarity={} aesthetic={} length={}\n",
            self.factor.name(),
            f.overall,
            f.similarity,
            f.aesthetic,
            f.length
        );
        out.push_str("delta,overall,similarity,aesthetic,phrases\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.delta, r.overall, r.similarity, r.aesthetic, r.phrases
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| CaprError::io(path, e))
    }
}

/// One conditioned evaluation per sweep value, varying only `factor`.
#[allow(clippy::too_many_arguments)]
pub fn delta_sweep(
    factor: SweepFactor,
    values: &[i64],
    frozen: DeltaVector,
    prompts: &[String],
    settings: &EvalSettings,
    reformulator: &dyn ReformulatorBackend,
    predictor: &dyn QualityPredictor,
    quantizer: &QuantizerSpec,
    generator: &dyn GeneratorBackend,
    scorer: &dyn ScorerBackend,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(CaprError::invalid("no sweep values"));
    }
    let kmax = quantizer.k as i64 - 1;
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let delta = factor.apply(frozen, v);
        for b in [delta.overall, delta.similarity, delta.aesthetic] {
            if b.abs() > kmax {
                return Err(CaprError::invalid(format!("bin delta {b} outside ±{kmax}")));
            }
        }
        let policy = Policy::conditioned(format!("{}={v}", factor.name()), reformulator, predictor, quantizer, delta);
        let run = evaluate_policy(&policy, prompts, settings, generator, scorer)?;
        let a = run.aggregate;
        rows.push(SweepRow {
            delta: v,
            overall: a.overall,
            similarity: a.similarity,
            aesthetic: a.aesthetic,
            phrases: a.phrases,
        });
    }
    Ok(SweepTable { factor, frozen, rows })
}
