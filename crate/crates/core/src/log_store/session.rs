use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::TextSimilarity;
use crate::capability::QualityScores;
use crate::error::{CaprError, Result};

use super::{InteractionRecord, LogStore};

/// Adjacent records join a session when the gap is within `gap_seconds`
/// (inclusive) and their similarity exceeds `sim_threshold` (strict).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub gap_seconds: i64,
    pub sim_threshold: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            gap_seconds: 1200,
            sim_threshold: 0.1,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.gap_seconds <= 0 {
            return Err(CaprError::invalid("gap_seconds must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(CaprError::invalid("sim_threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub records: Vec<InteractionRecord>,
}

impl Session {
    pub fn first(&self) -> &InteractionRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &InteractionRecord {
        self.records.last().expect("sessions are non-empty")
    }
}

/// (first prompt, last prompt) of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformulationPair {
    pub initial_prompt: String,
    pub final_prompt: String,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_scores: Option<QualityScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_scores: Option<QualityScores>,
}

fn segment_user(
    records: &[InteractionRecord],
    params: SegmentationParams,
    similarity: &dyn TextSimilarity,
) -> Result<Vec<Session>> {
    let user_id = &records[0].user_id;
    let mut groups: Vec<Vec<InteractionRecord>> = vec![vec![records[0].clone()]];
    for pair in records.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let within_gap = next.timestamp - prev.timestamp <= params.gap_seconds;
        let joined = within_gap && {
            let sim = similarity.similarity(&prev.prompt, &next.prompt)?;
            if !(0.0..=1.0).contains(&sim) {
                return Err(CaprError::Backend {
                    endpoint: "similarity".into(),
                    message: format!("similarity {sim} outside [0, 1]"),
                });
            }
            sim > params.sim_threshold
        };
        if joined {
            groups.last_mut().expect("non-empty").push(next.clone());
        } else {
            groups.push(vec![next.clone()]);
        }
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, records)| Session {
            session_id: format!("{user_id}#{i}"),
            user_id: user_id.clone(),
            records,
        })
        .collect())
}

/// Split each user's time-ordered records into sessions by adjacent-pair
/// chaining. Users are processed in parallel; output order follows the store.
pub fn segment_sessions(
    store: &LogStore,
    params: SegmentationParams,
    similarity: &dyn TextSimilarity,
) -> Result<Vec<Session>> {
    params.validate()?;
    let users: Vec<&[InteractionRecord]> = store.by_user().collect();
    let per_user = users
        .par_iter()
        .map(|recs| segment_user(recs, params, similarity))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_user.into_iter().flatten().collect())
}

/// One pair per session with at least two records whose first and last
/// prompts differ.
pub fn extract_pairs(sessions: &[Session]) -> Vec<ReformulationPair> {
    sessions
        .iter()
        .filter(|s| s.records.len() >= 2 && s.first().prompt != s.last().prompt)
        .map(|s| ReformulationPair {
            initial_prompt: s.first().prompt.clone(),
            final_prompt: s.last().prompt.clone(),
            session_id: s.session_id.clone(),
            initial_scores: s.first().scores,
            final_scores: s.last().scores,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::JaccardSimilarity;
    use proptest::prelude::*;

    /// Similarity fixed regardless of text.
    struct Constant(f64);
    impl TextSimilarity for Constant {
        fn similarity(&self, _: &str, _: &str) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn rec(user: &str, ts: i64, prompt: &str) -> InteractionRecord {
        InteractionRecord {
            user_id: user.into(),
            timestamp: ts,
            prompt: prompt.into(),
            image_id: None,
            scores: None,
            seed: None,
        }
    }

    fn store(recs: Vec<InteractionRecord>) -> LogStore {
        LogStore::from_records(recs).unwrap().0
    }

    fn sizes(sessions: &[Session]) -> Vec<usize> {
        sessions.iter().map(|s| s.records.len()).collect()
    }

    #[test]
    fn gap_and_similarity_examples() {
        let p = SegmentationParams::default();
        let s = store(vec![rec("u", 0, "a"), rec("u", 600, "b"), rec("u", 900, "c")]);
        assert_eq!(sizes(&segment_sessions(&s, p, &Constant(0.5)).unwrap()), vec![3]);

        let s = store(vec![rec("u", 0, "a"), rec("u", 1500, "b")]);
        assert_eq!(sizes(&segment_sessions(&s, p, &Constant(0.5)).unwrap()), vec![1, 1]);

        let s = store(vec![rec("u", 0, "a"), rec("u", 600, "b")]);
        assert_eq!(sizes(&segment_sessions(&s, p, &Constant(0.05)).unwrap()), vec![1, 1]);
    }

    #[test]
    fn boundaries_are_inclusive_gap_strict_similarity() {
        let p = SegmentationParams::default();
        let s = store(vec![rec("u", 0, "a"), rec("u", 1200, "b"), rec("u", 2401, "c")]);
        assert_eq!(sizes(&segment_sessions(&s, p, &Constant(0.5)).unwrap()), vec![2, 1]);
        let s = store(vec![rec("u", 0, "a"), rec("u", 10, "b")]);
        assert_eq!(sizes(&segment_sessions(&s, p, &Constant(0.1)).unwrap()), vec![1, 1]);
    }

    #[test]
    fn session_ids_are_per_user_indices() {
        let s = store(vec![rec("a", 0, "x"), rec("a", 5000, "y"), rec("b", 0, "z")]);
        let sessions = segment_sessions(&s, SegmentationParams::default(), &Constant(1.0)).unwrap();
        let ids: Vec<_> = sessions.iter().map(|s| s.session_id.as_str()).collect();
        assert_eq!(ids, vec!["a#0", "a#1", "b#0"]);
    }

    #[test]
    fn out_of_range_similarity_is_an_error() {
        let s = store(vec![rec("u", 0, "a"), rec("u", 1, "b")]);
        assert!(segment_sessions(&s, SegmentationParams::default(), &Constant(1.5)).is_err());
        let bad = SegmentationParams { gap_seconds: 0, sim_threshold: 0.1 };
        assert!(segment_sessions(&s, bad, &Constant(0.5)).is_err());
    }

    #[test]
    fn pair_extraction_rules() {
        let mk = |prompts: &[&str]| Session {
            session_id: "u#0".into(),
            user_id: "u".into(),
            records: prompts.iter().enumerate().map(|(i, p)| rec("u", i as i64, p)).collect(),
        };
        let pairs = extract_pairs(&[mk(&["p1", "p2", "p3"])]);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].initial_prompt.as_str(), pairs[0].final_prompt.as_str()), ("p1", "p3"));
        assert!(extract_pairs(&[mk(&["p1"])]).is_empty());
        assert!(extract_pairs(&[mk(&["p1", "p1"])]).is_empty());
    }

    fn arb_records() -> impl Strategy<Value = Vec<InteractionRecord>> {
        proptest::collection::vec(
            (0usize..3, 0i64..5000, proptest::collection::vec(0usize..6, 1..4)),
            1..40,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(u, ts, words)| {
                    let prompt: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
                    rec(&format!("user{u}"), ts, &prompt.join(" "))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn segmentation_is_a_partition(recs in arb_records(), gap in 1i64..3000, thr in 0.0f64..1.0) {
            let Ok((s, _)) = LogStore::from_records(recs) else { return Ok(()); };
            let params = SegmentationParams { gap_seconds: gap, sim_threshold: thr };
            let sessions = segment_sessions(&s, params, &JaccardSimilarity).unwrap();
            let flat: Vec<InteractionRecord> =
                sessions.iter().flat_map(|x| x.records.iter().cloned()).collect();
            prop_assert_eq!(flat.as_slice(), s.records());
            prop_assert!(sessions.iter().all(|x| x.records.iter().all(|r| r.user_id == x.user_id)));
            prop_assert!(extract_pairs(&sessions).len() <= sessions.len());
            prop_assert_eq!(segment_sessions(&s, params, &JaccardSimilarity).unwrap(), sessions);
        }

        #[test]
        fn tighter_params_never_merge(
            recs in arb_records(), gap in 2i64..3000, thr in 0.0f64..0.9,
            dgap in 1i64..1000, dthr in 0.0f64..0.5,
        ) {
            let Ok((s, _)) = LogStore::from_records(recs) else { return Ok(()); };
            let loose = SegmentationParams { gap_seconds: gap, sim_threshold: thr };
            let tight = SegmentationParams {
                gap_seconds: (gap - dgap).max(1),
                sim_threshold: (thr + dthr).min(1.0),
            };
            let a = segment_sessions(&s, loose, &JaccardSimilarity).unwrap().len();
            let b = segment_sessions(&s, tight, &JaccardSimilarity).unwrap().len();
            prop_assert!(b >= a);
        }
    }
}
