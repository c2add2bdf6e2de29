use serde::{Deserialize, Serialize};

use crate::error::{CaprError, Result};
use crate::numeric::Real;

use super::QualityScores;

/// Bucket count used when none is configured.
pub const DEFAULT_K: usize = 10;

/// Observed score range of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> FeatureRange<T> {
    pub fn new(min: T, max: T) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(CaprError::invalid(format!(
                "feature range requires finite min <= max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    /// Range spanning exactly the given values.
    pub fn spanning(values: impl IntoIterator<Item = T>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(Self { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    /// Bin width `(max - min) / k`.
    pub fn bin_width(&self, k: usize) -> T {
        (self.max - self.min) / T::from_count(k)
    }
}

/// Map a value onto `0..k` by evenly splitting `[min, max]` into `k` bins.
///
/// Values outside the range clamp to the edge bins; a degenerate range maps
/// everything to bin 0.
pub fn quantize<T: Real>(value: T, range: FeatureRange<T>, k: usize) -> usize {
    debug_assert!(k >= 2);
    if range.is_degenerate() || value.is_nan() {
        return 0;
    }
    let scaled = ((value - range.min) / (range.max - range.min) * T::from_count(k)).floor();
    if scaled <= T::zero() {
        0
    } else {
        let top = k - 1;
        scaled.to_usize().map_or(top, |b| b.min(top))
    }
}

/// Per-feature ranges plus bucket count, persisted as `quantizer.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub k: usize,
    pub features: FeatureRanges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub overall: FeatureRange<f64>,
    pub similarity: FeatureRange<f64>,
    pub aesthetic: FeatureRange<f64>,
}

/// Quantized (similarity, aesthetic, overall) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreBins {
    pub similarity: usize,
    pub aesthetic: usize,
    pub overall: usize,
}

impl QuantizerSpec {
    pub fn new(k: usize, features: FeatureRanges) -> Result<Self> {
        let spec = Self { k, features };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(CaprError::invalid(format!("K must be >= 2, got {}", self.k)));
        }
        for r in [
            self.features.overall,
            self.features.similarity,
            self.features.aesthetic,
        ] {
            FeatureRange::new(r.min, r.max)?;
        }
        Ok(())
    }

    /// Fit per-feature min/max over the given scores.
    pub fn fit(scores: &[QualityScores], k: usize) -> Result<Self> {
        if scores.is_empty() {
            return Err(CaprError::invalid("cannot fit a quantizer on zero scores"));
        }
        let span = |f: fn(&QualityScores) -> f64| {
            FeatureRange::spanning(scores.iter().map(f)).expect("non-empty")
        };
        Self::new(
            k,
            FeatureRanges {
                overall: span(|s| s.overall),
                similarity: span(|s| s.similarity),
                aesthetic: span(|s| s.aesthetic),
            },
        )
    }

    pub fn bins(&self, scores: &QualityScores) -> ScoreBins {
        ScoreBins {
            similarity: quantize(scores.similarity, self.features.similarity, self.k),
            aesthetic: quantize(scores.aesthetic, self.features.aesthetic, self.k),
            overall: quantize(scores.overall, self.features.overall, self.k),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, body).map_err(|e| CaprError::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
        let spec: Self = serde_json::from_str(&raw)?;
        spec.validate()?;
        Ok(spec)
    }
}
