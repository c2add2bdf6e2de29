//! Prompt-only quality prediction.
//!
//! The reference predictor is per-target ridge regression over a handful of
//! text features. Anything implementing [`QualityPredictor`] can stand in
//! for it, including a remote model.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capability::QualityScores;
use crate::error::{CaprError, Result};
use crate::linalg::ridge;
use crate::log_store::ReformulationPair;
use crate::text::{phrase_count, tokenize, StyleLexicon};

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Predicts quality scores from prompt text alone.
pub trait QualityPredictor: Send + Sync {
    fn predict(&self, prompt: &str) -> Result<QualityScores>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptFeatures {
    pub bias: f64,
    pub phrase_count: f64,
    pub token_count: f64,
    pub style_term_count: f64,
    pub mean_token_length: f64,
    pub has_digit: f64,
}

impl PromptFeatures {
    pub const DIM: usize = 6;

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.bias,
            self.phrase_count,
            self.token_count,
            self.style_term_count,
            self.mean_token_length,
            self.has_digit,
        ]
    }
}

pub fn featurize(prompt: &str, lexicon: &StyleLexicon) -> PromptFeatures {
    let tokens = tokenize(prompt);
    let mean_len = if tokens.is_empty() {
        0.0
    } else {
        tokens.iter().map(|t| t.chars().count()).sum::<usize>() as f64 / tokens.len() as f64
    };
    PromptFeatures {
        bias: 1.0,
        phrase_count: phrase_count(prompt) as f64,
        token_count: tokens.len() as f64,
        style_term_count: tokens.iter().filter(|t| lexicon.contains(t)).count() as f64,
        mean_token_length: mean_len,
        has_digit: if prompt.chars().any(|c| c.is_ascii_digit()) { 1.0 } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetWeights {
    pub overall: Vec<f64>,
    pub similarity: Vec<f64>,
    pub aesthetic: Vec<f64>,
}

/// Initial and final prompts of every scored pair, with their scores.
pub fn training_data(pairs: &[ReformulationPair]) -> Vec<(String, QualityScores)> {
    pairs
        .iter()
        .flat_map(|p| {
            [
                p.initial_scores.map(|s| (p.initial_prompt.clone(), s)),
                p.final_scores.map(|s| (p.final_prompt.clone(), s)),
            ]
        })
        .flatten()
        .collect()
}

/// Fitted ridge weights, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub lambda: f64,
    pub lexicon_hash: String,
    pub weights: TargetWeights,
    pub samples: usize,
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl SurrogateModel {
    /// Closed-form ridge fit per target; the bias weight is not penalized.
    pub fn fit(data: &[(String, QualityScores)], lambda: f64, lexicon: &StyleLexicon) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CaprError::invalid("ridge strength must be positive"));
        }
        let distinct: BTreeSet<&str> = data.iter().map(|(p, _)| p.as_str()).collect();
        if distinct.len() < 2 {
            return Err(CaprError::invalid("surrogate fit needs at least two distinct prompts"));
        }
        let rows: Vec<Vec<f64>> = data.iter().map(|(p, _)| featurize(p, lexicon).to_vec()).collect();
        let mut penalize = [true; PromptFeatures::DIM];
        penalize[0] = false;
        let solve = |f: fn(&QualityScores) -> f64| {
            let y: Vec<f64> = data.iter().map(|(_, s)| f(s)).collect();
            ridge(&rows, &y, lambda, &penalize)
        };
        Ok(Self {
            lambda,
            lexicon_hash: lexicon.hash().to_string(),
            weights: TargetWeights {
                overall: solve(|s| s.overall)?,
                similarity: solve(|s| s.similarity)?,
                aesthetic: solve(|s| s.aesthetic)?,
            },
            samples: data.len(),
        })
    }

    /// `w · featurize(prompt)` per target, unclamped.
    pub fn predict_features(&self, features: &PromptFeatures) -> QualityScores {
        let x = features.to_vec();
        QualityScores {
            overall: dot(&self.weights.overall, &x),
            similarity: dot(&self.weights.similarity, &x),
            aesthetic: dot(&self.weights.aesthetic, &x),
        }
    }

    pub fn predict(&self, prompt: &str, lexicon: &StyleLexicon) -> QualityScores {
        self.predict_features(&featurize(prompt, lexicon))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| CaprError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
        let m: Self = serde_json::from_str(&raw)?;
        let w = &m.weights;
        if [&w.overall, &w.similarity, &w.aesthetic]
            .iter()
            .any(|v| v.len() != PromptFeatures::DIM)
        {
            return Err(CaprError::invalid("surrogate weights have the wrong dimension"));
        }
        Ok(m)
    }
}

/// A fitted model bound to the lexicon it was trained with.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub model: SurrogateModel,
    pub lexicon: StyleLexicon,
}

impl Surrogate {
    pub fn new(model: SurrogateModel, lexicon: StyleLexicon) -> Result<Self> {
        if model.lexicon_hash != lexicon.hash() {
            return Err(CaprError::invalid(
                "surrogate was fitted with a different style lexicon",
            ));
        }
        Ok(Self { model, lexicon })
    }
}

impl QualityPredictor for Surrogate {
    fn predict(&self, prompt: &str) -> Result<QualityScores> {
        Ok(self.model.predict(prompt, &self.lexicon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> StyleLexicon {
        StyleLexicon::default()
    }

    #[test]
    fn featurize_examples() {
        let f = featurize("a cat", &lex());
        assert_eq!((f.phrase_count, f.token_count, f.style_term_count, f.has_digit), (1.0, 2.0, 0.0, 0.0));
        let f = featurize("4k, artstation", &lex());
        assert_eq!((f.style_term_count, f.has_digit), (2.0, 1.0));
        assert_eq!(featurize("ab cdef", &lex()).mean_token_length, 3.0);
        assert_eq!(featurize(",,", &lex()).mean_token_length, 0.0);
    }

    fn data() -> Vec<(String, QualityScores)> {
        [
            "a cat", "a red fox, 4k", "castle, artstation, detailed", "dog in rain",
            "robot, cinematic, octane, 8k, hdr", "owl", "a quiet lake at dawn, soft light",
        ]
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = i as f64 * 0.1;
            (p.to_string(), QualityScores { overall: 0.2 + v, similarity: 0.9 - v * v, aesthetic: 0.3 + 0.5 * v })
        })
        .collect()
    }

    #[test]
    fn constant_targets_are_reproduced() {
        let q = QualityScores { overall: 0.42, similarity: 0.7, aesthetic: -1.5 };
        let d: Vec<_> = data().into_iter().map(|(p, _)| (p, q)).collect();
        let m = SurrogateModel::fit(&d, 1.0, &lex()).unwrap();
        for p in ["a cat", "anything else, 4k, hdr"] {
            let out = m.predict(p, &lex());
            assert!((out.overall - 0.42).abs() < 1e-9);
            assert!((out.similarity - 0.7).abs() < 1e-9);
            assert!((out.aesthetic + 1.5).abs() < 1e-9);
        }
    }

    fn mse(m: &SurrogateModel, d: &[(String, QualityScores)], f: fn(&QualityScores) -> f64) -> f64 {
        d.iter()
            .map(|(p, s)| (f(&m.predict(p, &lex())) - f(s)).powi(2))
            .sum::<f64>()
            / d.len() as f64
    }

    fn variance(d: &[(String, QualityScores)], f: fn(&QualityScores) -> f64) -> f64 {
        let mean = d.iter().map(|(_, s)| f(s)).sum::<f64>() / d.len() as f64;
        d.iter().map(|(_, s)| (f(s) - mean).powi(2)).sum::<f64>() / d.len() as f64
    }

    #[test]
    fn training_mse_below_target_variance() {
        let d = data();
        let m = SurrogateModel::fit(&d, 1.0, &lex()).unwrap();
        for f in [|s: &QualityScores| s.overall, |s: &QualityScores| s.similarity, |s: &QualityScores| s.aesthetic] {
            assert!(mse(&m, &d, f) <= variance(&d, f) + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let q = QualityScores { overall: 0.0, similarity: 0.0, aesthetic: 0.0 };
        let same = vec![("a".to_string(), q), ("a".to_string(), q)];
        assert!(SurrogateModel::fit(&same, 1.0, &lex()).is_err());
        assert!(SurrogateModel::fit(&data(), 0.0, &lex()).is_err());
    }

    #[test]
    fn persistence_and_lexicon_binding() {
        let m = SurrogateModel::fit(&data(), 1.0, &lex()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surrogate.json");
        m.save(&path).unwrap();
        let loaded = SurrogateModel::load(&path).unwrap();
        assert_eq!(loaded, m);
        let s = Surrogate::new(loaded, lex()).unwrap();
        assert_eq!(s.predict("a cat").unwrap(), s.predict("a cat").unwrap());

        let other = StyleLexicon::from_json(r#"{"style_terms":["x"],"fillers":["y"]}"#).unwrap();
        assert!(Surrogate::new(m, other).is_err());
    }

    fn objective(m: &SurrogateModel, d: &[(String, QualityScores)]) -> f64 {
        let sse: f64 = d
            .iter()
            .map(|(p, s)| (m.predict(p, &lex()).overall - s.overall).powi(2))
            .sum();
        sse
    }

    proptest! {
        #[test]
        fn training_error_weakly_shrinks_with_lambda(l1 in 0.01f64..10.0, ratio in 0.01f64..1.0) {
            let d = data();
            let hi = SurrogateModel::fit(&d, l1, &lex()).unwrap();
            let lo = SurrogateModel::fit(&d, l1 * ratio, &lex()).unwrap();
            prop_assert!(objective(&lo, &d) <= objective(&hi, &d) + 1e-10);
        }
    }
}
