//! Deterministic synthetic world.
//!
//! Images are feature triples `(s, n, u)`: distinct style terms in the
//! prompt, its phrase count, and a hash-derived noise value in `[-1, 1]`.
//! Scores are closed-form in those features, and the reformulator follows
//! the condition it is given exactly.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::capability::{CapabilityCondition, QualityScores};
use crate::error::{CaprError, Result};
use crate::text::{phrase_count, phrases, StyleLexicon};

use super::{GeneratorBackend, ImageRef, ReformulatorBackend, ScorerBackend, TextSimilarity};

/// SHA-256 of `prompt`, a zero byte and the little-endian seed; the first 8
/// digest bytes as a little-endian `u64`.
fn hash64(prompt: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Fixed 64-bit hash of `(prompt, seed)` mapped affinely onto `[-1, 1]`.
pub fn hash_uniform(prompt: &str, seed: u64) -> f64 {
    hash64(prompt, seed) as f64 / u64::MAX as f64 * 2.0 - 1.0
}

#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    lexicon: StyleLexicon,
}

impl SyntheticGenerator {
    pub fn new(lexicon: StyleLexicon) -> Self {
        Self { lexicon }
    }

    pub fn synth_generate(&self, prompt: &str, seed: u64) -> ImageRef {
        let s = self.lexicon.distinct_terms(prompt).len() as f64;
        let n = phrase_count(prompt) as f64;
        let u = hash_uniform(prompt, seed);
        ImageRef {
            image_id: format!("synth-{:016x}", hash64(prompt, seed)),
            features: Some(vec![s, n, u]),
        }
    }
}

impl GeneratorBackend for SyntheticGenerator {
    fn generate(&self, prompt: &str, seed: u64, _steps: u32) -> Result<ImageRef> {
        Ok(self.synth_generate(prompt, seed))
    }
}

/// Closed-form scorer over synthetic image features. Ignores the prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticScorer;

impl SyntheticScorer {
    pub fn scores_from_features(s: f64, n: f64, u: f64) -> QualityScores {
        let similarity =
            (0.9 - 0.04 * s - 0.02 * (n - 8.0).max(0.0) + 0.02 * u).clamp(0.0, 1.0);
        let aesthetic =
            (0.3 + 0.12 * s.min(5.0) - 0.03 * (s - 5.0).max(0.0) + 0.02 * u).clamp(0.0, 1.0);
        QualityScores {
            overall: 0.5 * similarity + 0.5 * aesthetic,
            similarity,
            aesthetic,
        }
    }

    pub fn synth_score(&self, image: &ImageRef) -> Result<QualityScores> {
        match (image.style_count(), image.phrase_count(), image.noise()) {
            (Some(s), Some(n), Some(u)) => Ok(Self::scores_from_features(s, n, u)),
            _ => Err(CaprError::Backend {
                endpoint: "synthetic".into(),
                message: format!("image {} carries no synthetic features", image.image_id),
            }),
        }
    }
}

impl ScorerBackend for SyntheticScorer {
    fn score(&self, _prompt: &str, image: &ImageRef) -> Result<QualityScores> {
        self.synth_score(image)
    }
}

/// Condition-following stand-in for the reformulation model.
///
/// Target style count `s* = round(aesthetic_bin / 9 * 6)`, capped at 4 when
/// the expected similarity bin is 8 or more; target phrase count
/// `n* = max(1, phrase_count)`. Original phrases stay in order, missing
/// lexicon terms are appended until `s*` is reached, then fillers are
/// appended (or trailing phrases dropped) until exactly `n*` phrases remain.
#[derive(Debug, Clone)]
pub struct SyntheticReformulator {
    lexicon: StyleLexicon,
}

impl SyntheticReformulator {
    pub fn new(lexicon: StyleLexicon) -> Self {
        Self { lexicon }
    }

    pub fn target_style_count(condition: &CapabilityCondition) -> usize {
        let e = &condition.expected;
        let s = (e.aesthetic as f64 / 9.0 * 6.0).round() as usize;
        if e.similarity >= 8 {
            s.min(4)
        } else {
            s
        }
    }

    pub fn synth_reformulate(&self, prompt: &str, condition: &CapabilityCondition) -> String {
        let s_target = Self::target_style_count(condition);
        let n_target = condition.expected.phrase_count.max(1);

        let mut out: Vec<String> = phrases(prompt).into_iter().map(str::to_string).collect();
        let present: BTreeSet<String> = self.lexicon.distinct_terms(prompt);
        let mut styles = present.len();
        for term in &self.lexicon.style_terms {
            if styles >= s_target {
                break;
            }
            if !present.contains(term) {
                out.push(term.clone());
                styles += 1;
            }
        }
        let mut fillers = self.lexicon.fillers.iter().cycle();
        while out.len() < n_target {
            out.push(fillers.next().expect("non-empty filler list").clone());
        }
        out.truncate(n_target);
        out.join(", ")
    }
}

impl ReformulatorBackend for SyntheticReformulator {
    fn reformulate(&self, prompt: &str, condition: &CapabilityCondition) -> Result<String> {
        Ok(self.synth_reformulate(prompt, condition))
    }
}

/// Returns the prompt unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityReformulator;

impl ReformulatorBackend for IdentityReformulator {
    fn reformulate(&self, prompt: &str, _condition: &CapabilityCondition) -> Result<String> {
        Ok(prompt.to_string())
    }
}

/// Token-set Jaccard over lowercase whitespace tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardSimilarity;

impl JaccardSimilarity {
    pub fn jaccard(a: &str, b: &str) -> f64 {
        let set = |t: &str| -> BTreeSet<String> {
            t.split_whitespace().map(str::to_lowercase).collect()
        };
        let (sa, sb) = (set(a), set(b));
        if sa.is_empty() && sb.is_empty() {
            return 1.0;
        }
        let inter = sa.intersection(&sb).count();
        let union = sa.union(&sb).count();
        inter as f64 / union as f64
    }
}

impl TextSimilarity for JaccardSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(Self::jaccard(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> StyleLexicon {
        StyleLexicon::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn generation_is_deterministic_and_counts_styles() {
        let g = SyntheticGenerator::new(lex());
        let p = "a cat, artstation, 4k, cinematic, artstation";
        assert_eq!(g.synth_generate(p, 3), g.synth_generate(p, 3));
        let img = g.synth_generate(p, 3);
        assert_eq!(img.style_count(), Some(3.0));
        assert_eq!(img.phrase_count(), Some(5.0));
        let u = img.noise().unwrap();
        assert!((-1.0..=1.0).contains(&u));
    }

    #[test]
    fn seeds_spread_noise() {
        let g = SyntheticGenerator::new(lex());
        let mut us: Vec<f64> = (0..100).map(|s| g.synth_generate("a cat", s).noise().unwrap()).collect();
        us.sort_by(f64::total_cmp);
        us.dedup();
        assert!(us.len() >= 99);
    }

    #[test]
    fn score_formula_examples() {
        let q = SyntheticScorer::scores_from_features(0.0, 1.0, 0.0);
        assert!(close(q.similarity, 0.9) && close(q.aesthetic, 0.3) && close(q.overall, 0.6));
        let q = SyntheticScorer::scores_from_features(5.0, 6.0, 0.0);
        assert!(close(q.similarity, 0.7) && close(q.aesthetic, 0.9) && close(q.overall, 0.8));
        let q = SyntheticScorer::scores_from_features(8.0, 12.0, 0.0);
        assert!(close(q.similarity, 0.50) && close(q.aesthetic, 0.81) && close(q.overall, 0.655));
    }

    #[test]
    fn scorer_rejects_foreign_images() {
        let img = ImageRef { image_id: "remote-1".into(), features: None };
        assert!(SyntheticScorer.synth_score(&img).is_err());
    }

    #[test]
    fn reformulate_null_condition_is_identity() {
        let r = SyntheticReformulator::new(lex());
        let c = CapabilityCondition::from_parts((0, 0, 0), (9, 0, 9), 1);
        assert_eq!(r.synth_reformulate("a cat", &c), "a cat");
    }

    #[test]
    fn reformulate_appends_lexicon_up_to_phrase_budget() {
        // s* = 6 but n* = 4 leaves room for three lexicon terms after "a cat".
        let r = SyntheticReformulator::new(lex());
        let c = CapabilityCondition::from_parts((0, 0, 0), (0, 9, 9), 4);
        assert_eq!(
            r.synth_reformulate("a cat", &c),
            "a cat, artstation, detailed, cinematic"
        );
    }

    #[test]
    fn reformulate_fills_and_truncates() {
        let r = SyntheticReformulator::new(lex());
        // aesthetic 3 -> s* = 2, n* = 5: two terms then two fillers.
        let c = CapabilityCondition::from_parts((0, 0, 0), (0, 3, 9), 5);
        assert_eq!(
            r.synth_reformulate("a cat", &c),
            "a cat, artstation, detailed, soft light, wide angle"
        );
        // Similarity bin 8 caps s* at 4.
        let c = CapabilityCondition::from_parts((0, 0, 0), (8, 9, 9), 9);
        let out = r.synth_reformulate("a cat", &c);
        assert_eq!(lex().distinct_terms(&out).len(), 4);
        // Existing terms count toward s*, first phrase always survives.
        let c = CapabilityCondition::from_parts((0, 0, 0), (0, 3, 9), 1);
        assert_eq!(r.synth_reformulate("a dog, 4k, hdr, x", &c), "a dog");
        let c = CapabilityCondition::from_parts((0, 0, 0), (0, 3, 9), 0);
        assert_eq!(r.synth_reformulate("a dog, 4k", &c), "a dog");
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(JaccardSimilarity::jaccard("a b", "A b"), 1.0);
        assert_eq!(JaccardSimilarity::jaccard("a b c d e", "a f g h i j"), 0.1);
        assert_eq!(JaccardSimilarity::jaccard("x", "y"), 0.0);
    }

    proptest! {
        #[test]
        fn reformulated_phrase_count_matches_condition(
            words in proptest::collection::vec("[a-z]{1,6}", 1..6),
            aes in 0usize..10, sim in 0usize..10, n in 0usize..15,
        ) {
            let prompt = words.join(", ");
            let r = SyntheticReformulator::new(lex());
            let c = CapabilityCondition::from_parts((0, 0, 0), (sim, aes, 9), n);
            let out = r.synth_reformulate(&prompt, &c);
            prop_assert_eq!(phrase_count(&out), n.max(1));
            prop_assert!(out.starts_with(words[0].as_str()));
            // Random lowercase words may collide with lexicon terms; skip those.
            prop_assume!(lex().distinct_terms(&prompt).is_empty());
            let n_star = n.max(1);
            let capacity = n_star.saturating_sub(words.len().min(n_star));
            let expected_styles = SyntheticReformulator::target_style_count(&c).min(capacity);
            prop_assert_eq!(lex().distinct_terms(&out).len(), expected_styles);
        }

        #[test]
        fn jaccard_symmetric_and_bounded(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
            let x = JaccardSimilarity::jaccard(&a, &b);
            prop_assert_eq!(x, JaccardSimilarity::jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn aesthetic_shape(n in 0.0f64..15.0, u in -1.0f64..1.0, s in 0u32..12) {
            let s = s as f64;
            let here = SyntheticScorer::scores_from_features(s, n, u);
            let next = SyntheticScorer::scores_from_features(s + 1.0, n, u);
            if s < 5.0 {
                prop_assert!(next.aesthetic >= here.aesthetic);
            } else {
                prop_assert!(next.aesthetic <= here.aesthetic);
            }
            prop_assert!(next.similarity <= here.similarity);
            let longer = SyntheticScorer::scores_from_features(s, n + 1.0, u);
            prop_assert!(longer.similarity <= here.similarity);
        }
    }
}
