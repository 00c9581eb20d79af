//! Append-only JSON-lines assessment log.
//!
//! Every line is one [`LogEntry`]. The in-memory index (assessments by id,
//! idempotency keys, consents) is always rebuilt from the file, so replaying
//! the log reconstructs exactly what the running service knew.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use mindscreen_core::{ClassifierKind, DisorderLabel};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentEntry {
    pub timestamp: DateTime<Utc>,
    pub assessment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    /// Parsed answers by feature name; `None` marks an unanswered item.
    pub answers: BTreeMap<String, Option<f64>>,
    pub label: DisorderLabel,
    pub model_kind: ClassifierKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub assessment_id: String,
    pub agreed: bool,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    Assessment(AssessmentEntry),
    Consent(ConsentRecord),
}

/// State recovered from a log file.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Replay {
    /// In append order.
    pub assessments: Vec<AssessmentEntry>,
    pub consents: Vec<ConsentRecord>,
}

impl Replay {
    fn push(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Assessment(a) => self.assessments.push(a),
            LogEntry::Consent(c) => self.consents.push(c),
        }
    }
}

/// Reads every entry from `path`. A missing file is an empty log.
pub fn replay(path: &Path) -> Result<Replay, ServiceError> {
    let mut out = Replay::default();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(ServiceError::Log(e.to_string())),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ServiceError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Log(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug, PartialEq)]
pub enum Append {
    Created(AssessmentEntry),
    /// The idempotency key was seen before with the same answers.
    Replayed(AssessmentEntry),
    /// The idempotency key was seen before with different answers.
    KeyConflict,
}

#[derive(Debug, PartialEq)]
pub enum ConsentOutcome {
    Recorded(ConsentRecord, DisorderLabel),
    UnknownAssessment,
    Duplicate,
}

/// Open log plus its index. Callers serialize access (the service keeps it
/// behind a mutex), which makes each check-and-append atomic.
#[derive(Debug)]
pub struct AssessmentLog {
    path: PathBuf,
    file: File,
    by_id: HashMap<String, AssessmentEntry>,
    by_key: HashMap<String, String>,
    consents: HashMap<String, ConsentRecord>,
}

impl AssessmentLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        let existing = replay(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::Log(format!("{}: {e}", path.display())))?;
        let mut log = Self { path, file, by_id: HashMap::new(), by_key: HashMap::new(), consents: HashMap::new() };
        for a in existing.assessments {
            log.index_assessment(a);
        }
        for c in existing.consents {
            log.consents.insert(c.assessment_id.clone(), c);
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AssessmentEntry> {
        self.by_id.get(id)
    }

    fn index_assessment(&mut self, a: AssessmentEntry) {
        if let Some(key) = &a.idempotency_key {
            self.by_key.insert(key.clone(), a.assessment_id.clone());
        }
        self.by_id.insert(a.assessment_id.clone(), a);
    }

    fn write(&mut self, entry: &LogEntry) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(entry).map_err(|e| ServiceError::Log(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.sync_data())
            .map_err(|e| ServiceError::Log(e.to_string()))
    }

    /// Appends `entry` unless its idempotency key is already taken.
    pub fn append_assessment(&mut self, entry: AssessmentEntry) -> Result<Append, ServiceError> {
        if let Some(key) = &entry.idempotency_key {
            if let Some(id) = self.by_key.get(key) {
                let prior = &self.by_id[id];
                return Ok(if prior.answers == entry.answers {
                    Append::Replayed(prior.clone())
                } else {
                    Append::KeyConflict
                });
            }
        }
        self.write(&LogEntry::Assessment(entry.clone()))?;
        self.index_assessment(entry.clone());
        Ok(Append::Created(entry))
    }

    pub fn record_consent(&mut self, assessment_id: &str, agreed: bool) -> Result<ConsentOutcome, ServiceError> {
        let Some(label) = self.by_id.get(assessment_id).map(|a| a.label) else {
            return Ok(ConsentOutcome::UnknownAssessment);
        };
        if self.consents.contains_key(assessment_id) {
            return Ok(ConsentOutcome::Duplicate);
        }
        let record = ConsentRecord { assessment_id: assessment_id.to_owned(), agreed, timestamp: Utc::now() };
        self.write(&LogEntry::Consent(record.clone()))?;
        self.consents.insert(record.assessment_id.clone(), record.clone());
        Ok(ConsentOutcome::Recorded(record, label))
    }

    pub fn flush(&mut self) -> Result<(), ServiceError> {
        self.file.sync_all().map_err(|e| ServiceError::Log(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, key: Option<&str>, sleep: f64) -> AssessmentEntry {
        AssessmentEntry {
            timestamp: Utc::now(),
            assessment_id: id.into(),
            idempotency_key: key.map(Into::into),
            answers: BTreeMap::from([("sleeping_hour".to_string(), Some(sleep)), ("income".to_string(), None)]),
            label: DisorderLabel::Anxiety,
            model_kind: ClassifierKind::Knn,
        }
    }

    #[test]
    fn keys_consents_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut log = AssessmentLog::open(&path).unwrap();
        assert!(matches!(log.append_assessment(entry("a", Some("k"), 6.0)).unwrap(), Append::Created(_)));
        match log.append_assessment(entry("b", Some("k"), 6.0)).unwrap() {
            Append::Replayed(prior) => assert_eq!(prior.assessment_id, "a"),
            other => panic!("{other:?}"),
        }
        assert_eq!(log.append_assessment(entry("c", Some("k"), 7.0)).unwrap(), Append::KeyConflict);
        log.append_assessment(entry("d", None, 5.0)).unwrap();
        assert!(matches!(log.record_consent("a", true).unwrap(), ConsentOutcome::Recorded(_, DisorderLabel::Anxiety)));
        assert_eq!(log.record_consent("a", false).unwrap(), ConsentOutcome::Duplicate);
        assert_eq!(log.record_consent("zz", true).unwrap(), ConsentOutcome::UnknownAssessment);
        drop(log);

        let r = replay(&path).unwrap();
        assert_eq!(r.assessments.iter().map(|a| a.assessment_id.as_str()).collect::<Vec<_>>(), ["a", "d"]);
        assert_eq!(r.consents.len(), 1);

        let mut log = AssessmentLog::open(&path).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.record_consent("a", true).unwrap(), ConsentOutcome::Duplicate);
        assert!(matches!(log.append_assessment(entry("e", Some("k"), 6.0)).unwrap(), Append::Replayed(_)));
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "{\"event\":\"assessment\"}\n").unwrap();
        let err = replay(&path).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
