//! The totally ordered record of lifecycle transitions.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccessClass, AccountRef, CommitmentId, LifecycleState, ResponsibilityId, Tick};
use crate::relation::Relation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: Tick,
    pub cid: CommitmentId,
    pub responsibility: ResponsibilityId,
    pub action: String,
    pub access: AccessClass,
    pub old_state: LifecycleState,
    pub new_state: LifecycleState,
    pub account: AccountRef,
    /// Relation against the active set, on admission records only.
    pub relation: Option<Relation>,
    /// Set on a deactivation whose condition did not hold.
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExecutionLog {
    records: Vec<LogRecord>,
}

#[derive(Debug, Error)]
pub enum LogFormatError {
    #[error("log line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExecutionLog {
    pub fn new(records: Vec<LogRecord>) -> Self {
        Self { records }
    }

    pub fn push(&mut self, record: LogRecord) -> &mut LogRecord {
        self.records.push(record);
        self.records.last_mut().expect("just pushed")
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LogRecord> {
        self.records.iter()
    }

    /// Records touching one account, in log order.
    pub fn for_account<'a>(&'a self, account: &'a AccountRef) -> impl Iterator<Item = &'a LogRecord> + 'a {
        self.records.iter().filter(move |r| &r.account == account)
    }

    /// Commitments in the order they became `Active`.
    pub fn activation_order(&self) -> Vec<(CommitmentId, ResponsibilityId)> {
        self.records
            .iter()
            .filter(|r| r.new_state == LifecycleState::Active)
            .map(|r| (r.cid, r.responsibility))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LogFormatError> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.records {
            wtr.serialize(r).map_err(csv_err)?;
        }
        // An empty log still gets a header row.
        if self.records.is_empty() {
            wtr.write_record(CSV_HEADER).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, LogFormatError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut records = Vec::new();
        for (i, rec) in rdr.deserialize().enumerate() {
            let rec: LogRecord = rec.map_err(|e| LogFormatError::Parse {
                line: i + 2,
                reason: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LogFormatError> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogFormatError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| LogFormatError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    /// Parses either format, telling them apart by the first non-blank byte.
    pub fn parse_any(bytes: &[u8]) -> Result<Self, LogFormatError> {
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'{') => Self::read_jsonl(bytes),
            Some(_) => Self::read_csv(bytes),
            None => Ok(Self::default()),
        }
    }
}

const CSV_HEADER: [&str; 10] = [
    "tick",
    "cid",
    "responsibility",
    "action",
    "access",
    "old_state",
    "new_state",
    "account",
    "relation",
    "failed",
];

fn csv_err(e: csv::Error) -> LogFormatError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LogFormatError::Io(io),
        other => LogFormatError::Parse {
            line: 0,
            reason: format!("{other:?}"),
        },
    }
}

impl<'a> IntoIterator for &'a ExecutionLog {
    type Item = &'a LogRecord;
    type IntoIter = std::slice::Iter<'a, LogRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
