use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::capability::{PromptScorer, QualityScores};
use crate::error::{CaprError, Result};

use super::{InteractionRecord, Session};

/// Initial versus final quality of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub session_id: String,
    pub initial_overall: f64,
    pub final_overall: f64,
    pub initial_aesthetic: f64,
    pub final_aesthetic: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionReport {
    pub rows: Vec<ReportRow>,
    /// Sessions with at least two records that could not be scored.
    pub skipped: usize,
}

impl SessionReport {
    /// Rows as CSV with header
    /// `session_id,initial_overall,final_overall,initial_aesthetic,final_aesthetic`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "session_id",
                "initial_overall",
                "final_overall",
                "initial_aesthetic",
                "final_aesthetic",
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CaprError::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> CaprError {
    CaprError::invalid(format!("csv: {e}"))
}

fn record_scores(rec: &InteractionRecord, scorer: Option<&dyn PromptScorer>) -> Result<QualityScores> {
    match (rec.scores, scorer) {
        (Some(s), _) => Ok(s),
        (None, Some(sc)) => sc.prompt_scores(&rec.prompt),
        (None, None) => Err(CaprError::invalid("no precomputed scores and no scorer")),
    }
}

/// One row per session of length two or more. Precomputed scores are used
/// as-is; otherwise `scorer` is consulted. Unscorable sessions are skipped
/// and counted.
pub fn session_report(sessions: &[Session], scorer: Option<&dyn PromptScorer>) -> SessionReport {
    let mut report = SessionReport::default();
    for s in sessions.iter().filter(|s| s.records.len() >= 2) {
        match record_scores(s.first(), scorer).and_then(|a| Ok((a, record_scores(s.last(), scorer)?))) {
            Ok((first, last)) => report.rows.push(ReportRow {
                session_id: s.session_id.clone(),
                initial_overall: first.overall,
                final_overall: last.overall,
                initial_aesthetic: first.aesthetic,
                final_aesthetic: last.aesthetic,
            }),
            Err(e) => {
                warn!("session {} skipped: {e}", s.session_id);
                report.skipped += 1;
            }
        }
    }
    report
}

/// Histogram of initial versus final score distributions, columns
/// `metric,bin_start,bin_end,initial_count,final_count`.
pub fn histogram_csv(rows: &[ReportRow], bin_width: f64) -> Result<String> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(CaprError::invalid("bin width must be positive"));
    }
    let mut out = String::from("metric,bin_start,bin_end,initial_count,final_count\n");
    type Pick = fn(&ReportRow) -> (f64, f64);
    let metrics: [(&str, Pick); 2] = [
        ("overall", |r| (r.initial_overall, r.final_overall)),
        ("aesthetic", |r| (r.initial_aesthetic, r.final_aesthetic)),
    ];
    for (name, pick) in metrics {
        let mut bins: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
        for r in rows {
            let (a, b) = pick(r);
            bins.entry((a / bin_width).floor() as i64).or_default().0 += 1;
            bins.entry((b / bin_width).floor() as i64).or_default().1 += 1;
        }
        let (Some(&lo), Some(&hi)) = (bins.keys().next(), bins.keys().next_back()) else {
            continue;
        };
        for idx in lo..=hi {
            let (i, f) = bins.get(&idx).copied().unwrap_or_default();
            let start = idx as f64 * bin_width;
            out.push_str(&format!("{name},{start:.6},{:.6},{i},{f}\n", start + bin_width));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{SyntheticGenerator, SyntheticScorer};
    use crate::capability::GenerateAndScore;
    use crate::text::StyleLexicon;

    fn rec(ts: i64, prompt: &str, scores: Option<QualityScores>) -> InteractionRecord {
        InteractionRecord {
            user_id: "u".into(),
            timestamp: ts,
            prompt: prompt.into(),
            image_id: None,
            scores,
            seed: None,
        }
    }

    fn session(i: usize, recs: Vec<InteractionRecord>) -> Session {
        Session { session_id: format!("u#{i}"), user_id: "u".into(), records: recs }
    }

    struct Panics;
    impl PromptScorer for Panics {
        fn prompt_scores(&self, _: &str) -> Result<QualityScores> {
            panic!("backend must not be called");
        }
    }

    #[test]
    fn precomputed_scores_pass_through() {
        let q = |o, a| Some(QualityScores { overall: o, similarity: 0.5, aesthetic: a });
        let sessions = vec![
            session(0, vec![rec(0, "a", q(0.1, 0.2)), rec(1, "b", q(0.3, 0.4))]),
            session(1, vec![rec(5, "c", q(0.5, 0.6)), rec(6, "d", None), rec(7, "e", q(0.7, 0.8))]),
            session(2, vec![rec(9, "f", q(0.9, 0.9))]),
        ];
        let rep = session_report(&sessions, Some(&Panics));
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[1].final_aesthetic, 0.8);
        assert_eq!(
            rep.to_csv().unwrap().lines().next().unwrap(),
            "session_id,initial_overall,final_overall,initial_aesthetic,final_aesthetic"
        );
    }

    #[test]
    fn unscorable_sessions_are_counted() {
        let sessions = vec![session(0, vec![rec(0, "a", None), rec(1, "b", None)])];
        let rep = session_report(&sessions, None);
        assert!(rep.rows.is_empty());
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn synthetic_rows_match_direct_scoring() {
        let lex = StyleLexicon::default();
        let generator = SyntheticGenerator::new(lex.clone());
        let pipeline = GenerateAndScore {
            generator: &generator,
            scorer: &SyntheticScorer,
            images_per_prompt: 1,
            seed: 7,
            steps: 20,
        };
        let sessions: Vec<Session> = (0..10)
            .map(|i| {
                session(i, vec![
                    rec(0, &format!("scene {i}"), None),
                    rec(1, &format!("scene {i}, artstation, 4k"), None),
                ])
            })
            .collect();
        let rep = session_report(&sessions, Some(&pipeline));
        assert_eq!(rep.rows.len(), 10);
        for (row, s) in rep.rows.iter().zip(&sessions) {
            let direct = |p: &str| SyntheticScorer.synth_score(&generator.synth_generate(p, 7)).unwrap();
            let (a, b) = (direct(&s.first().prompt), direct(&s.last().prompt));
            assert_eq!(row.initial_overall, a.overall);
            assert_eq!(row.final_overall, b.overall);
            assert_eq!(row.initial_aesthetic, a.aesthetic);
            assert_eq!(row.final_aesthetic, b.aesthetic);
        }
    }

    #[test]
    fn histogram_counts_both_sides() {
        let rows = vec![
            ReportRow { session_id: "a".into(), initial_overall: 0.12, final_overall: 0.31,
                initial_aesthetic: 0.5, final_aesthetic: 0.5 },
            ReportRow { session_id: "b".into(), initial_overall: 0.15, final_overall: 0.18,
                initial_aesthetic: 0.5, final_aesthetic: 0.55 },
        ];
        let csv = histogram_csv(&rows, 0.1).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,bin_start,bin_end,initial_count,final_count");
        assert_eq!(lines[1], "overall,0.100000,0.200000,2,1");
        assert_eq!(lines[2], "overall,0.200000,0.300000,0,0");
        assert_eq!(lines[3], "overall,0.300000,0.400000,0,1");
        assert_eq!(lines[4], "aesthetic,0.500000,0.600000,2,2");
        assert!(histogram_csv(&rows, 0.0).is_err());
    }
}
