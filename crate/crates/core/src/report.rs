//! Run metrics, the transition narrative, and file emission.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::log::{ExecutionLog, LogRecord};
use crate::model::{AccountRef, LifecycleState, ResponsibilityId, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSample {
    pub tick: Tick,
    pub account: AccountRef,
    pub length: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub friend_count: u64,
    pub family_count: u64,
    pub strange_count: u64,
    /// Distinct commitments that ever entered `Waiting`.
    pub waited_total: u64,
    pub commitments: u64,
    pub failed: u64,
    pub queue_length_series: Vec<QueueSample>,
    pub per_responsibility_counts: BTreeMap<ResponsibilityId, u64>,
}

pub fn state_counts(metrics: &Metrics) -> (u64, u64, u64) {
    (metrics.friend_count, metrics.family_count, metrics.strange_count)
}

pub fn waited_count(metrics: &Metrics) -> u64 {
    metrics.waited_total
}

/// Distinct commitments with a `Waiting` record, recomputed from a log.
pub fn waited_in_log(log: &ExecutionLog) -> u64 {
    log.iter()
        .filter(|r| r.new_state == LifecycleState::Waiting)
        .map(|r| r.cid)
        .collect::<BTreeSet<_>>()
        .len() as u64
}

pub fn action_label(r: ResponsibilityId) -> &'static str {
    match r {
        ResponsibilityId::Resp1 => "Collects Information",
        ResponsibilityId::Resp2 => "Shares Information",
        ResponsibilityId::Resp3 => "Protects Information",
        ResponsibilityId::Resp4 => "Signs Off",
        ResponsibilityId::Resp5 => "Guards Privacy",
        ResponsibilityId::Resp6 => "Checks Sharing Goal",
        ResponsibilityId::Resp7 => "Post Activity",
    }
}

fn state_word(s: LifecycleState) -> &'static str {
    match s {
        LifecycleState::Created => "Created",
        LifecycleState::Waiting => "Waiting",
        LifecycleState::Active => "Active",
        LifecycleState::Signaled => "Signal",
        LifecycleState::Deactivated => "Deactivate",
    }
}

/// One narrative line, e.g. `C_Resp1 : Collects Information is Active`.
pub fn narrative_line(r: &LogRecord) -> String {
    let n = r.responsibility.number();
    match r.new_state {
        LifecycleState::Signaled => format!("C_Resp{n} : is Signal"),
        s => {
            let mut line = format!("C_Resp{n} : {} is {}", action_label(r.responsibility), state_word(s));
            if r.failed {
                line.push_str(" (Failed)");
            }
            line
        }
    }
}

pub fn render_narrative(log: &ExecutionLog) -> String {
    let mut out = String::new();
    for r in log {
        let _ = writeln!(out, "{}", narrative_line(r));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "text" | "json" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}` (expected csv or text)")),
        }
    }
}

/// Writes `contents` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn queue_lengths_csv(metrics: &Metrics) -> io::Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(["tick", "account", "length"])?;
    for s in &metrics.queue_length_series {
        wtr.write_record([s.tick.to_string(), s.account.to_string(), s.length.to_string()])?;
    }
    wtr.into_inner().map_err(|e| e.into_error())
}

pub fn metrics_csv(metrics: &Metrics) -> io::Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(["metric", "value"])?;
    let mut row = |k: &str, v: u64| wtr.write_record([k.to_string(), v.to_string()]);
    row("friend", metrics.friend_count)?;
    row("family", metrics.family_count)?;
    row("strange", metrics.strange_count)?;
    row("waited_total", metrics.waited_total)?;
    row("commitments", metrics.commitments)?;
    row("failed", metrics.failed)?;
    for (r, n) in &metrics.per_responsibility_counts {
        wtr.write_record([format!("count_{r}"), n.to_string()])?;
    }
    wtr.into_inner().map_err(|e| e.into_error())
}

/// Structured-text (JSON) metrics, with the short counter names up front.
pub fn metrics_json(metrics: &Metrics) -> io::Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Doc<'a> {
        friend: u64,
        family: u64,
        strange: u64,
        waited_total: u64,
        commitments: u64,
        failed: u64,
        per_responsibility_counts: &'a BTreeMap<ResponsibilityId, u64>,
        queue_length_series: &'a [QueueSample],
    }
    let doc = Doc {
        friend: metrics.friend_count,
        family: metrics.family_count,
        strange: metrics.strange_count,
        waited_total: metrics.waited_total,
        commitments: metrics.commitments,
        failed: metrics.failed,
        per_responsibility_counts: &metrics.per_responsibility_counts,
        queue_length_series: &metrics.queue_length_series,
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

/// File names [`emit`] produces for a format.
pub fn output_files(format: Format) -> &'static [&'static str] {
    match format {
        Format::Csv => &["log.csv", "metrics.csv", "queue_length.csv", "narrative.txt"],
        Format::Text => &["log.jsonl", "metrics.json", "narrative.txt"],
    }
}

/// Writes the run's artifacts into `dir`, each file atomically.
pub fn emit(metrics: &Metrics, log: &ExecutionLog, format: Format, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let to_io = |e: crate::log::LogFormatError| match e {
        crate::log::LogFormatError::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
    };
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            log.write_csv(&mut buf).map_err(to_io)?;
            write_atomic(&dir.join("log.csv"), &buf)?;
            write_atomic(&dir.join("metrics.csv"), &metrics_csv(metrics)?)?;
            write_atomic(&dir.join("queue_length.csv"), &queue_lengths_csv(metrics)?)?;
        }
        Format::Text => {
            let mut buf = Vec::new();
            log.write_jsonl(&mut buf).map_err(to_io)?;
            write_atomic(&dir.join("log.jsonl"), &buf)?;
            write_atomic(&dir.join("metrics.json"), &metrics_json(metrics)?)?;
        }
    }
    write_atomic(&dir.join("narrative.txt"), render_narrative(log).as_bytes())
}
