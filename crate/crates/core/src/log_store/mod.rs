//! Interaction log ingestion and session mining.

mod report;
mod session;

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::capability::QualityScores;
use crate::error::{CaprError, Result};

pub use report::{histogram_csv, session_report, ReportRow, SessionReport};
pub use session::{extract_pairs, segment_sessions, ReformulationPair, SegmentationParams, Session};

pub const RECORDS_FILE: &str = "records.ndjson";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One logged generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<QualityScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InteractionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(CaprError::invalid("prompt is blank"));
        }
        if self.timestamp < 0 {
            return Err(CaprError::invalid(format!("negative timestamp {}", self.timestamp)));
        }
        if let Some(s) = &self.scores {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub ingested: usize,
    /// Malformed plus duplicate lines.
    pub skipped: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub record_count: usize,
    pub users: usize,
    /// Latest record timestamp, so re-ingesting the same log is byte-stable.
    pub ingested_at: i64,
}

/// Records sorted by `(user_id, timestamp)`, ties in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogStore {
    records: Vec<InteractionRecord>,
}

impl LogStore {
    /// Build from in-memory records, applying the same validation, dedup and
    /// ordering as [`ingest`].
    pub fn from_records(records: impl IntoIterator<Item = InteractionRecord>) -> Result<(Self, IngestReport)> {
        let mut report = IngestReport::default();
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for rec in records {
            if rec.validate().is_err() {
                report.malformed += 1;
                continue;
            }
            if !seen.insert((rec.user_id.clone(), rec.timestamp, rec.prompt.clone())) {
                report.duplicates += 1;
                continue;
            }
            kept.push(rec);
        }
        report.skipped = report.malformed + report.duplicates;
        report.ingested = kept.len();
        if kept.is_empty() {
            return Err(CaprError::EmptyLog);
        }
        kept.sort_by(|a, b| (&a.user_id, a.timestamp).cmp(&(&b.user_id, b.timestamp)));
        Ok((Self { records: kept }, report))
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Contiguous per-user slices in user order.
    pub fn by_user(&self) -> impl Iterator<Item = &[InteractionRecord]> {
        self.records.chunk_by(|a, b| a.user_id == b.user_id)
    }

    pub fn manifest(&self) -> StoreManifest {
        let users: BTreeSet<&str> = self.records.iter().map(|r| r.user_id.as_str()).collect();
        StoreManifest {
            record_count: self.records.len(),
            users: users.len(),
            ingested_at: self.records.iter().map(|r| r.timestamp).max().unwrap_or(0),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CaprError::io(dir, e))?;
        let mut body = String::new();
        for r in &self.records {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        let path = dir.join(RECORDS_FILE);
        std::fs::write(&path, body).map_err(|e| CaprError::io(&path, e))?;
        let path = dir.join(MANIFEST_FILE);
        let manifest = serde_json::to_string_pretty(&self.manifest())? + "\n";
        std::fs::write(&path, manifest).map_err(|e| CaprError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(RECORDS_FILE);
        let file = std::fs::File::open(&path).map_err(|e| CaprError::io(&path, e))?;
        let (store, report) = ingest(std::io::BufReader::new(file))?;
        if report.skipped > 0 {
            return Err(CaprError::invalid(format!(
                "store {} has {} invalid rows",
                path.display(),
                report.skipped
            )));
        }
        Ok(store)
    }
}

/// Parse NDJSON interaction records. Malformed and duplicate lines are
/// counted and skipped; blank lines are ignored.
pub fn ingest<R: BufRead>(input: R) -> Result<(LogStore, IngestReport)> {
    let mut malformed = 0;
    let mut parsed = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<InteractionRecord>(&line) {
            Ok(rec) => parsed.push(rec),
            Err(e) => {
                debug!("line {}: {e}", lineno + 1);
                malformed += 1;
            }
        }
    }
    let (store, mut report) = LogStore::from_records(parsed)?;
    report.malformed += malformed;
    report.skipped += malformed;
    Ok((store, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str) -> Result<(LogStore, IngestReport)> {
        ingest(input.as_bytes())
    }

    #[test]
    fn three_valid_lines() {
        let (store, rep) = run(concat!(
            r#"{"user_id":"u","timestamp":3,"prompt":"c"}"#, "\n",
            r#"{"user_id":"u","timestamp":1,"prompt":"a"}"#, "\n",
            r#"{"user_id":"t","timestamp":2,"prompt":"b"}"#, "\n",
        ))
        .unwrap();
        assert_eq!((rep.ingested, rep.skipped), (3, 0));
        let order: Vec<_> = store.records().iter().map(|r| r.prompt.as_str()).collect();
        assert_eq!(order, vec!["b", "a", "c"]);
    }

    #[test]
    fn missing_prompt_is_skipped() {
        let (_, rep) = run(concat!(
            r#"{"user_id":"u","timestamp":1,"prompt":"a"}"#, "\n",
            r#"{"user_id":"u","timestamp":2}"#, "\n",
            r#"{"user_id":"u","timestamp":3,"prompt":"b"}"#, "\n",
        ))
        .unwrap();
        assert_eq!((rep.ingested, rep.skipped, rep.malformed), (2, 1, 1));
    }

    #[test]
    fn duplicates_are_dropped() {
        let line = r#"{"user_id":"u","timestamp":1,"prompt":"a"}"#;
        let (store, rep) = run(&format!("{line}\n{line}\n")).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!((rep.ingested, rep.skipped, rep.duplicates), (1, 1, 1));
    }

    #[test]
    fn invalid_rows_and_empty_log() {
        assert!(matches!(run(""), Err(CaprError::EmptyLog)));
        assert!(matches!(
            run(r#"{"user_id":"u","timestamp":-1,"prompt":"a"}"#),
            Err(CaprError::EmptyLog)
        ));
        assert!(matches!(
            run(r#"{"user_id":"u","timestamp":1,"prompt":"   "}"#),
            Err(CaprError::EmptyLog)
        ));
    }

    #[test]
    fn timestamp_ties_keep_input_order() {
        let (store, _) = run(concat!(
            r#"{"user_id":"u","timestamp":5,"prompt":"second"}"#, "\n",
            r#"{"user_id":"u","timestamp":5,"prompt":"first"}"#, "\n",
        ))
        .unwrap();
        assert_eq!(store.records()[0].prompt, "second");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = run(concat!(
            r#"{"user_id":"u","timestamp":1,"prompt":"a","seed":4}"#, "\n",
            r#"{"user_id":"v","timestamp":9,"prompt":"b","scores":{"overall":0.1,"similarity":0.2,"aesthetic":0.3}}"#, "\n",
        ))
        .unwrap();
        store.save(dir.path()).unwrap();
        assert_eq!(LogStore::load(dir.path()).unwrap(), store);
        let manifest: StoreManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest, StoreManifest { record_count: 2, users: 2, ingested_at: 9 });
    }
}
